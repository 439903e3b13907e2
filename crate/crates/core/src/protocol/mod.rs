//! The four delegation algorithms, parameterized by a covering scheme.
//!
//! - [`key_gen`] shares `F` into `F_1..F_a`, draws a secret `r` and computes
//!   `s_u = r F_u`. Server `l` gets `{F_u : u in A_l}`.
//! - [`prob_gen`] shares `x` into `x_1..x_b`. Server `l` gets
//!   `{x_v : v in B_l}`. It needs no secret state.
//! - [`compute`] returns `y_{u,v} = F_u x_v` for every `(u, v)` in `C_l`.
//! - [`verify`] accepts iff `r . y_{u,v} == s_u . x_v` for every cell, and
//!   then returns `sum y_{u,v} = F x`.

mod experiment;
mod servers;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::RngCore;

pub use experiment::{
    run_security_experiment, Adversary, AdversaryView, HonestAdversary, RandomTamperAdversary, Round,
    ZeroOffsetAdversary,
};
pub use servers::{tamper_all, tamper_output, Client, LocalServers, Servers};

use crate::covering::{Cell, CoveringScheme};
use crate::error::{Error, Result};
use crate::field::{dot, mat_vec_mul, random_vector, vec_mat_mul, FieldMatrix, FieldModulus, FieldVector};
use crate::sharing::{share_matrix, share_vector};

/// The public delegation key. It is empty: anyone can prepare inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PublicKey;

/// The function shares held by one server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionShare {
    server: usize,
    shares: BTreeMap<usize, Arc<FieldMatrix>>,
}

impl FunctionShare {
    pub fn new(server: usize, shares: BTreeMap<usize, Arc<FieldMatrix>>) -> Self {
        Self { server, shares }
    }

    pub fn server(&self) -> usize {
        self.server
    }

    pub fn get(&self, u: usize) -> Option<&FieldMatrix> {
        self.shares.get(&u).map(Arc::as_ref)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.shares.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &FieldMatrix)> + '_ {
        self.shares.iter().map(|(&u, m)| (u, m.as_ref()))
    }
}

/// The client's secret verification key `(r, s_1..s_a)`.
///
/// Counts how many verifications it has been used for; once the count
/// reaches [`Self::max_uses`] the soundness bound exceeds `2^-40` and the
/// caller should run a fresh key generation.
#[derive(Debug)]
pub struct FunctionVerificationKey {
    r: FieldVector,
    s: Vec<FieldVector>,
    uses: AtomicU64,
    max_uses: u64,
}

impl Clone for FunctionVerificationKey {
    fn clone(&self) -> Self {
        Self {
            r: self.r.clone(),
            s: self.s.clone(),
            uses: AtomicU64::new(self.uses.load(Ordering::Relaxed)),
            max_uses: self.max_uses,
        }
    }
}

impl PartialEq for FunctionVerificationKey {
    fn eq(&self, other: &Self) -> bool {
        self.r == other.r && self.s == other.s
    }
}

impl Eq for FunctionVerificationKey {}

/// `floor(q / (2^40 ab))`: verifications after which `pab/(q - pab)`
/// would pass `2^-40`.
pub fn default_max_uses(modulus: &FieldModulus, cells: usize) -> u64 {
    let bound = (modulus.value() >> 40usize) / BigUint::from(cells.max(1));
    bound.to_u64().unwrap_or(u64::MAX)
}

impl FunctionVerificationKey {
    pub fn new(r: FieldVector, s: Vec<FieldVector>, max_uses: u64) -> Result<Self> {
        for su in &s {
            r.modulus().check_same(su.modulus())?;
        }
        Ok(Self {
            r,
            s,
            uses: AtomicU64::new(0),
            max_uses,
        })
    }

    /// Rebuilds a stored key together with its use count.
    pub fn restore(r: FieldVector, s: Vec<FieldVector>, uses: u64, max_uses: u64) -> Result<Self> {
        let key = Self::new(r, s, max_uses)?;
        key.uses.store(uses, Ordering::Relaxed);
        Ok(key)
    }

    pub fn r(&self) -> &FieldVector {
        &self.r
    }

    /// `s_u`, 1-based.
    pub fn s(&self, u: usize) -> Option<&FieldVector> {
        u.checked_sub(1).and_then(|i| self.s.get(i))
    }

    pub fn s_all(&self) -> &[FieldVector] {
        &self.s
    }

    pub fn uses(&self) -> u64 {
        self.uses.load(Ordering::Relaxed)
    }

    pub fn max_uses(&self) -> u64 {
        self.max_uses
    }

    pub fn needs_refresh(&self) -> bool {
        self.uses() >= self.max_uses
    }
}

/// Output of [`key_gen`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionKeyMaterial {
    pub pk: PublicKey,
    /// `rho[l - 1]` belongs to server `l`.
    pub rho: Vec<FunctionShare>,
    pub vk: FunctionVerificationKey,
}

impl FunctionKeyMaterial {
    pub fn rows(&self) -> usize {
        self.vk.r.dim()
    }

    pub fn cols(&self) -> usize {
        self.vk.s.first().map_or(0, FieldVector::dim)
    }

    pub fn modulus(&self) -> &FieldModulus {
        self.vk.r.modulus()
    }
}

/// The input shares held by one server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputShare {
    server: usize,
    shares: BTreeMap<usize, FieldVector>,
}

impl InputShare {
    pub fn new(server: usize, shares: BTreeMap<usize, FieldVector>) -> Self {
        Self { server, shares }
    }

    pub fn server(&self) -> usize {
        self.server
    }

    pub fn get(&self, v: usize) -> Option<&FieldVector> {
        self.shares.get(&v)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.shares.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &FieldVector)> + '_ {
        self.shares.iter().map(|(&v, x)| (v, x))
    }

    pub fn into_map(self) -> BTreeMap<usize, FieldVector> {
        self.shares
    }
}

/// The client's per-input verification key: all `b` input shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputVerificationKey {
    shares: Vec<FieldVector>,
}

impl InputVerificationKey {
    pub fn new(shares: Vec<FieldVector>) -> Self {
        Self { shares }
    }

    /// `x_v`, 1-based.
    pub fn share(&self, v: usize) -> Option<&FieldVector> {
        v.checked_sub(1).and_then(|i| self.shares.get(i))
    }

    pub fn shares(&self) -> &[FieldVector] {
        &self.shares
    }
}

/// Output of [`prob_gen`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputKeyMaterial {
    /// `sigma[l - 1]` belongs to server `l`.
    pub sigma: Vec<InputShare>,
    pub vk: InputVerificationKey,
}

/// One server's results, keyed by the cells of its `C_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerOutput {
    server: usize,
    results: BTreeMap<Cell, FieldVector>,
}

impl ServerOutput {
    pub fn new(server: usize, results: BTreeMap<Cell, FieldVector>) -> Self {
        Self { server, results }
    }

    pub fn server(&self) -> usize {
        self.server
    }

    pub fn get(&self, cell: Cell) -> Option<&FieldVector> {
        self.results.get(&cell)
    }

    pub fn get_mut(&mut self, cell: Cell) -> Option<&mut FieldVector> {
        self.results.get_mut(&cell)
    }

    pub fn results(&self) -> &BTreeMap<Cell, FieldVector> {
        &self.results
    }

    pub fn into_results(self) -> BTreeMap<Cell, FieldVector> {
        self.results
    }
}

/// The first check that failed during verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rejection {
    pub server: usize,
    pub cell: Cell,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "verification failed at server {} cell ({}, {})",
            self.server, self.cell.0, self.cell.1
        )
    }
}

/// A verified value, or the rejection marker when a server cheated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verified<T> {
    Accepted(T),
    Rejected(Rejection),
}

impl<T> Verified<T> {
    pub fn accepted(self) -> Option<T> {
        match self {
            Verified::Accepted(v) => Some(v),
            Verified::Rejected(_) => None,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Verified::Accepted(_))
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Verified<U> {
        match self {
            Verified::Accepted(v) => Verified::Accepted(f(v)),
            Verified::Rejected(r) => Verified::Rejected(r),
        }
    }
}

pub type VerifyOutcome = Verified<FieldVector>;

fn checked_scheme(scheme: &CoveringScheme) -> Result<()> {
    scheme.validate().map_err(Error::InvalidScheme)
}

/// Shares `f` for the servers of `scheme` and derives the verification key.
///
/// Randomness is drawn as: `a - 1` share matrices (row-major), then `r`.
/// Performs `a * m * d` multiplications.
pub fn key_gen<R: RngCore + ?Sized>(f: &FieldMatrix, scheme: &CoveringScheme, rng: &mut R) -> Result<FunctionKeyMaterial> {
    checked_scheme(scheme)?;
    let shares: Vec<Arc<FieldMatrix>> = share_matrix(f, scheme.a, rng)?.into_shares().into_iter().map(Arc::new).collect();
    let r = random_vector(f.rows(), f.modulus(), rng)?;
    let s = shares.iter().map(|fu| vec_mat_mul(&r, fu)).collect::<Result<Vec<_>>>()?;
    let rho = scheme
        .a_sets
        .iter()
        .enumerate()
        .map(|(l, a_set)| FunctionShare::new(l + 1, a_set.iter().map(|&u| (u, Arc::clone(&shares[u - 1]))).collect()))
        .collect();
    let max_uses = default_max_uses(f.modulus(), scheme.a * scheme.b);
    Ok(FunctionKeyMaterial {
        pk: PublicKey,
        rho,
        vk: FunctionVerificationKey::new(r, s, max_uses)?,
    })
}

/// Shares `x` for the servers of `scheme`. Performs no multiplications.
pub fn prob_gen<R: RngCore + ?Sized>(
    _pk: &PublicKey,
    x: &FieldVector,
    scheme: &CoveringScheme,
    rng: &mut R,
) -> Result<InputKeyMaterial> {
    checked_scheme(scheme)?;
    let shares = share_vector(x, scheme.b, rng)?.into_shares();
    let sigma = scheme
        .b_sets
        .iter()
        .enumerate()
        .map(|(l, b_set)| InputShare::new(l + 1, b_set.iter().map(|&v| (v, shares[v - 1].clone())).collect()))
        .collect();
    Ok(InputKeyMaterial {
        sigma,
        vk: InputVerificationKey::new(shares),
    })
}

/// The work of server `server` (1-based): `F_u x_v` for each `(u, v)` in
/// its partition cell.
pub fn compute(server: usize, rho: &FunctionShare, sigma: &InputShare, scheme: &CoveringScheme) -> Result<ServerOutput> {
    let slice = scheme.slice(server).ok_or(Error::UnknownServer(server))?;
    compute_cells(server, &slice.c_set, rho, sigma)
}

/// [`compute`] against an explicit cell list, for servers that only know
/// their own slice of the scheme.
pub fn compute_cells<'a>(
    server: usize,
    cells: impl IntoIterator<Item = &'a Cell>,
    rho: &FunctionShare,
    sigma: &InputShare,
) -> Result<ServerOutput> {
    let mut results = BTreeMap::new();
    for &(u, v) in cells {
        let fu = rho.get(u).ok_or(Error::MissingShare {
            server,
            kind: "function",
            index: u,
        })?;
        let xv = sigma.get(v).ok_or(Error::MissingShare {
            server,
            kind: "input",
            index: v,
        })?;
        results.insert((u, v), mat_vec_mul(fu, xv)?);
    }
    Ok(ServerOutput::new(server, results))
}

/// Checks every server result and reconstructs `F x`.
///
/// Servers are checked in ascending order and cells lexicographically; the
/// first failing check is reported. Missing or extra results are an error,
/// not a rejection. Performs `ab(m + d)` multiplications when all checks
/// pass.
pub fn verify(
    vk_f: &FunctionVerificationKey,
    vk_x: &InputVerificationKey,
    outputs: &[ServerOutput],
    scheme: &CoveringScheme,
) -> Result<VerifyOutcome> {
    checked_scheme(scheme)?;
    if outputs.len() != scheme.k {
        return Err(Error::ServerCount {
            expected: scheme.k,
            found: outputs.len(),
        });
    }
    if vk_f.s.len() != scheme.a || vk_x.shares.len() != scheme.b {
        return Err(Error::DimensionMismatch {
            expected: scheme.a,
            found: vk_f.s.len(),
        });
    }
    let mut by_server: Vec<Option<&ServerOutput>> = vec![None; scheme.k];
    for out in outputs {
        let slot = out
            .server
            .checked_sub(1)
            .and_then(|l| by_server.get_mut(l))
            .ok_or(Error::UnknownServer(out.server))?;
        if slot.replace(out).is_some() {
            return Err(Error::ResultKeys { server: out.server });
        }
    }
    for (l, out) in by_server.iter().enumerate() {
        let out = out.expect("k distinct servers");
        if !out.results.keys().eq(scheme.c_sets[l].iter()) {
            return Err(Error::ResultKeys { server: l + 1 });
        }
    }

    vk_f.uses.fetch_add(1, Ordering::Relaxed);
    let m = vk_f.r.dim();
    let mut sum: Option<FieldVector> = None;
    for out in by_server.into_iter().flatten() {
        for (&(u, v), y) in &out.results {
            if y.dim() != m {
                return Err(Error::DimensionMismatch { expected: m, found: y.dim() });
            }
            let lhs = dot(&vk_f.r, y)?;
            let rhs = dot(&vk_f.s[u - 1], &vk_x.shares[v - 1])?;
            if lhs != rhs {
                return Ok(Verified::Rejected(Rejection {
                    server: out.server,
                    cell: (u, v),
                }));
            }
            sum = Some(match sum {
                None => y.clone(),
                Some(acc) => acc.add(y)?,
            });
        }
    }
    Ok(Verified::Accepted(sum.expect("a valid scheme has at least one cell")))
}

/// Runs every server honestly in-process.
pub fn compute_all(rho: &[FunctionShare], sigma: &[InputShare], scheme: &CoveringScheme) -> Result<Vec<ServerOutput>> {
    if rho.len() != scheme.k || sigma.len() != scheme.k {
        return Err(Error::ServerCount {
            expected: scheme.k,
            found: rho.len().min(sigma.len()),
        });
    }
    (1..=scheme.k).map(|l| compute(l, &rho[l - 1], &sigma[l - 1], scheme)).collect()
}
