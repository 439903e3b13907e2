//! The verifiability experiment: an adversary controlling every server
//! sees all function shares and the input shares of each round, picks the
//! inputs, and crafts the server results. It wins if verification ever
//! accepts a wrong value.

use rand::RngCore;

use super::servers::random_nonzero_vector;
use super::{compute_all, key_gen, prob_gen, verify, FunctionShare, InputShare, PublicKey, ServerOutput, Verified};
use crate::covering::CoveringScheme;
use crate::error::{Error, Result};
use crate::field::{mat_vec_mul, random_vector, FieldMatrix, FieldModulus, FieldVector};

/// One finished attempt as the adversary sees it.
#[derive(Debug, Clone)]
pub struct Round {
    pub sigma: Vec<InputShare>,
    pub results: Vec<ServerOutput>,
    /// Whether verification accepted.
    pub accepted: bool,
}

/// Everything the adversary may look at. The verification keys are not
/// part of it.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryView<'a> {
    pub pk: &'a PublicKey,
    pub rho: &'a [FunctionShare],
    pub transcript: &'a [Round],
    pub scheme: &'a CoveringScheme,
    pub modulus: &'a FieldModulus,
    pub cols: usize,
}

pub trait Adversary {
    fn choose_input(&mut self, view: &AdversaryView<'_>) -> FieldVector;

    fn craft_results(&mut self, view: &AdversaryView<'_>, sigma: &[InputShare]) -> Vec<ServerOutput>;
}

/// Runs `p` attempts and returns `true` iff some accepted result differed
/// from `F x`.
pub fn run_security_experiment<A: Adversary + ?Sized, R: RngCore + ?Sized>(
    f: &FieldMatrix,
    p: usize,
    adversary: &mut A,
    scheme: &CoveringScheme,
    rng: &mut R,
) -> Result<bool> {
    let keys = key_gen(f, scheme, rng)?;
    let mut transcript: Vec<Round> = Vec::with_capacity(p);
    let mut won = false;
    for _ in 0..p {
        let x = {
            let view = AdversaryView {
                pk: &keys.pk,
                rho: &keys.rho,
                transcript: &transcript,
                scheme,
                modulus: f.modulus(),
                cols: f.cols(),
            };
            adversary.choose_input(&view)
        };
        if x.dim() != f.cols() {
            return Err(Error::Malformed(format!("adversary chose an input of dimension {}", x.dim())));
        }
        let input = prob_gen(&keys.pk, &x, scheme, rng)?;
        let results = {
            let view = AdversaryView {
                pk: &keys.pk,
                rho: &keys.rho,
                transcript: &transcript,
                scheme,
                modulus: f.modulus(),
                cols: f.cols(),
            };
            adversary.craft_results(&view, &input.sigma)
        };
        let outcome = verify(&keys.vk, &input.vk, &results, scheme)
            .map_err(|e| Error::Malformed(format!("adversary results: {e}")))?;
        let accepted = match outcome {
            Verified::Accepted(y) => {
                if y != mat_vec_mul(f, &x)? {
                    won = true;
                }
                true
            }
            Verified::Rejected(_) => false,
        };
        transcript.push(Round {
            sigma: input.sigma,
            results,
            accepted,
        });
    }
    Ok(won)
}

/// Runs `Compute` faithfully on random inputs.
#[derive(Debug)]
pub struct HonestAdversary<R> {
    rng: R,
}

impl<R: RngCore> HonestAdversary<R> {
    pub fn new(rng: R) -> Self {
        Self { rng }
    }
}

impl<R: RngCore> Adversary for HonestAdversary<R> {
    fn choose_input(&mut self, view: &AdversaryView<'_>) -> FieldVector {
        random_vector(view.cols, view.modulus, &mut self.rng).expect("positive dimension")
    }

    fn craft_results(&mut self, view: &AdversaryView<'_>, sigma: &[InputShare]) -> Vec<ServerOutput> {
        compute_all(view.rho, sigma, view.scheme).expect("honest compute on valid shares")
    }
}

/// Computes honestly, then adds a uniform nonzero offset to one uniformly
/// chosen `y_{u,v}`.
#[derive(Debug)]
pub struct RandomTamperAdversary<R> {
    rng: R,
}

impl<R: RngCore> RandomTamperAdversary<R> {
    pub fn new(rng: R) -> Self {
        Self { rng }
    }
}

impl<R: RngCore> Adversary for RandomTamperAdversary<R> {
    fn choose_input(&mut self, view: &AdversaryView<'_>) -> FieldVector {
        random_vector(view.cols, view.modulus, &mut self.rng).expect("positive dimension")
    }

    fn craft_results(&mut self, view: &AdversaryView<'_>, sigma: &[InputShare]) -> Vec<ServerOutput> {
        let mut outs = compute_all(view.rho, sigma, view.scheme).expect("honest compute on valid shares");
        let cells: Vec<(usize, (usize, usize))> = outs
            .iter()
            .enumerate()
            .flat_map(|(i, o)| o.results().keys().map(move |&c| (i, c)))
            .collect();
        let (i, cell) = cells[(self.rng.next_u64() % cells.len() as u64) as usize];
        let y = outs[i].get_mut(cell).expect("cell exists");
        let delta = random_nonzero_vector(y.dim(), view.modulus, &mut self.rng);
        *y = y.add(&delta).expect("same shape");
        outs
    }
}

/// "Tampers" with an all-zero offset, i.e. returns the honest results.
#[derive(Debug)]
pub struct ZeroOffsetAdversary<R> {
    inner: HonestAdversary<R>,
}

impl<R: RngCore> ZeroOffsetAdversary<R> {
    pub fn new(rng: R) -> Self {
        Self {
            inner: HonestAdversary::new(rng),
        }
    }
}

impl<R: RngCore> Adversary for ZeroOffsetAdversary<R> {
    fn choose_input(&mut self, view: &AdversaryView<'_>) -> FieldVector {
        self.inner.choose_input(view)
    }

    fn craft_results(&mut self, view: &AdversaryView<'_>, sigma: &[InputShare]) -> Vec<ServerOutput> {
        let mut outs = self.inner.craft_results(view, sigma);
        let zero = FieldVector::zeros(view.modulus, outs[0].results().values().next().map_or(1, FieldVector::dim))
            .expect("positive dimension");
        for out in &mut outs {
            let cells: Vec<_> = out.results().keys().copied().collect();
            for c in cells {
                let y = out.get_mut(c).expect("cell exists");
                *y = y.add(&zero).expect("same shape");
            }
        }
        outs
    }
}
