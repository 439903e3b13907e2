use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{compute, prob_gen, verify, FunctionKeyMaterial, FunctionShare, InputShare, PublicKey, ServerOutput, VerifyOutcome};
use crate::covering::CoveringScheme;
use crate::error::{Error, Result};
use crate::field::{FieldVector, FieldModulus};

/// Something that runs `Compute` on all `k` servers for one set of input
/// shares. Implemented in-process by [`LocalServers`] and over the network by
/// the transport layer.
pub trait Servers {
    type Error: From<Error>;

    fn compute_all(&mut self, sigma: &[InputShare]) -> std::result::Result<Vec<ServerOutput>, Self::Error>;
}

/// Adds a uniform nonzero offset to one uniformly chosen result of `out`.
/// Returns `false` when the server has no results to tamper with.
pub fn tamper_output<R: RngCore + ?Sized>(out: &mut ServerOutput, modulus: &FieldModulus, rng: &mut R) -> bool {
    let cells: Vec<_> = out.results().keys().copied().collect();
    if cells.is_empty() {
        return false;
    }
    let cell = cells[(rng.next_u64() % cells.len() as u64) as usize];
    let y = out.get_mut(cell).expect("cell exists");
    let delta = random_nonzero_vector(y.dim(), modulus, rng);
    *y = y.add(&delta).expect("same shape");
    true
}

/// Adds an independent uniform nonzero offset to every result of `out`.
pub fn tamper_all<R: RngCore + ?Sized>(out: &mut ServerOutput, modulus: &FieldModulus, rng: &mut R) {
    let cells: Vec<_> = out.results().keys().copied().collect();
    for cell in cells {
        let y = out.get_mut(cell).expect("cell exists");
        let delta = random_nonzero_vector(y.dim(), modulus, rng);
        *y = y.add(&delta).expect("same shape");
    }
}

pub(crate) fn random_nonzero_vector<R: RngCore + ?Sized>(dim: usize, modulus: &FieldModulus, rng: &mut R) -> FieldVector {
    loop {
        let v = crate::field::random_vector(dim, modulus, rng).expect("positive dimension");
        if !v.is_zero() {
            return v;
        }
    }
}

/// All `k` servers simulated in-process, optionally with one cheating.
#[derive(Debug)]
pub struct LocalServers {
    scheme: CoveringScheme,
    rho: Vec<FunctionShare>,
    modulus: FieldModulus,
    cheater: Option<(usize, ChaCha20Rng)>,
}

impl LocalServers {
    /// Hands each server its function shares; the verification key stays
    /// with the caller.
    pub fn new(scheme: &CoveringScheme, keys: &FunctionKeyMaterial) -> Self {
        Self {
            scheme: scheme.clone(),
            rho: keys.rho.clone(),
            modulus: keys.modulus().clone(),
            cheater: None,
        }
    }

    /// Makes server `server` (1-based) add a random nonzero offset to one of
    /// its results on every request.
    pub fn with_cheater(mut self, server: usize, seed: u64) -> Self {
        self.cheater = Some((server, ChaCha20Rng::seed_from_u64(seed)));
        self
    }
}

impl Servers for LocalServers {
    type Error = Error;

    fn compute_all(&mut self, sigma: &[InputShare]) -> Result<Vec<ServerOutput>> {
        let k = self.scheme.k;
        if sigma.len() != k {
            return Err(Error::ServerCount {
                expected: k,
                found: sigma.len(),
            });
        }
        let mut outs = Vec::with_capacity(k);
        for l in 1..=k {
            let mut out = compute(l, &self.rho[l - 1], &sigma[l - 1], &self.scheme)?;
            if let Some((cheater, rng)) = self.cheater.as_mut() {
                if *cheater == l {
                    tamper_output(&mut out, &self.modulus, rng);
                }
            }
            outs.push(out);
        }
        Ok(outs)
    }
}

/// A delegating client: holds the secret verification key of one function
/// and reuses it across inputs.
#[derive(Debug)]
pub struct Client<S> {
    scheme: CoveringScheme,
    keys: FunctionKeyMaterial,
    servers: S,
}

impl<S: Servers> Client<S> {
    pub fn new(scheme: CoveringScheme, keys: FunctionKeyMaterial, servers: S) -> Self {
        Self { scheme, keys, servers }
    }

    pub fn scheme(&self) -> &CoveringScheme {
        &self.scheme
    }

    pub fn keys(&self) -> &FunctionKeyMaterial {
        &self.keys
    }

    pub fn servers_mut(&mut self) -> &mut S {
        &mut self.servers
    }

    /// Shares `x`, collects every server's results and verifies them.
    pub fn delegate<R: RngCore + ?Sized>(&mut self, x: &FieldVector, rng: &mut R) -> std::result::Result<VerifyOutcome, S::Error> {
        if x.dim() != self.keys.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.keys.cols(),
                found: x.dim(),
            }
            .into());
        }
        let input = prob_gen(&PublicKey, x, &self.scheme, rng)?;
        let outputs = self.servers.compute_all(&input.sigma)?;
        Ok(verify(&self.keys.vk, &input.vk, &outputs, &self.scheme)?)
    }
}
