//! Exact arithmetic over `Z_q` for a runtime-chosen prime `q < 2^256`.
//!
//! Moduli below `2^63` use a plain `u128` path. Larger (odd) moduli use
//! four-limb Montgomery multiplication. Every value handed out by this module
//! is canonical, i.e. in `[0, q)`.

mod counter;
pub(crate) mod limbs;
mod linalg;
mod prime;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigUint;
use rand::RngCore;

pub use counter::{count_muls, mul_count, reset_mul_count};
pub use linalg::{dot, mat_vec_mul, random_matrix, random_vector, vec_mat_mul, FieldMatrix, FieldVector};

use crate::error::{Error, Result};
use limbs::Limbs;

/// The 256-bit prime used for all protocol defaults.
pub const DEFAULT_MODULUS_DECIMAL: &str =
    "82434016654300709346097073375351854135999471015108634126889281238621513052057";

const SMALL_LIMIT_BITS: u32 = 63;

#[derive(Debug)]
enum Reducer {
    Small { q: u64 },
    Montgomery { inv: u64, r2: Limbs },
}

#[derive(Debug)]
struct ModulusInner {
    q: Limbs,
    bits: u32,
    /// Bit mask applied to the top sampled limb; derived from `q - 1`.
    sample_bits: u32,
    reducer: Reducer,
}

/// A prime modulus. Cheap to clone; instances with the same value share one
/// allocation.
#[derive(Clone)]
pub struct FieldModulus(Arc<ModulusInner>);

fn interned() -> &'static Mutex<HashMap<Limbs, FieldModulus>> {
    static CACHE: OnceLock<Mutex<HashMap<Limbs, FieldModulus>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

impl FieldModulus {
    pub fn new(q: &BigUint) -> Result<Self> {
        let limbs = limbs::from_biguint(q).ok_or(Error::ModulusRange)?;
        Self::from_limbs(limbs)
    }

    pub fn from_u64(q: u64) -> Result<Self> {
        Self::from_limbs([q, 0, 0, 0])
    }

    /// The default 256-bit prime.
    pub fn default_256() -> Self {
        Self::from_str(DEFAULT_MODULUS_DECIMAL).expect("default modulus is prime")
    }

    pub fn from_be_bytes(bytes: &[u8; 32]) -> Result<Self> {
        Self::from_limbs(limbs::from_be_bytes(bytes))
    }

    fn from_limbs(q: Limbs) -> Result<Self> {
        if let Some(m) = interned().lock().unwrap().get(&q) {
            return Ok(m.clone());
        }
        let bits = limbs::bit_len(&q);
        if bits < 2 {
            return Err(Error::ModulusRange);
        }
        let big = limbs::to_biguint(&q);
        if !prime::is_prime(&big) {
            return Err(Error::NotPrime(big.to_string()));
        }
        let reducer = if bits <= SMALL_LIMIT_BITS {
            Reducer::Small { q: q[0] }
        } else {
            let r2 = (BigUint::from(1u8) << 512usize) % &big;
            Reducer::Montgomery {
                inv: limbs::mont_inv(q[0]),
                r2: limbs::from_biguint(&r2).unwrap(),
            }
        };
        let q_minus_one = limbs::sub(&q, &[1, 0, 0, 0]).0;
        let modulus = FieldModulus(Arc::new(ModulusInner {
            q,
            bits,
            sample_bits: limbs::bit_len(&q_minus_one),
            reducer,
        }));
        interned().lock().unwrap().insert(q, modulus.clone());
        Ok(modulus)
    }

    pub fn value(&self) -> BigUint {
        limbs::to_biguint(&self.0.q)
    }

    /// Bit length of `q`; plays the role of the security parameter.
    pub fn bits(&self) -> u32 {
        self.0.bits
    }

    /// `q` as `u64` when it fits.
    pub fn as_u64(&self) -> Option<u64> {
        let q = &self.0.q;
        (q[1] == 0 && q[2] == 0 && q[3] == 0).then_some(q[0])
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        limbs::to_be_bytes(&self.0.q)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement::from_raw(limbs::ZERO, self)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// `value mod q`.
    pub fn element(&self, value: u64) -> FieldElement {
        let raw = match self.0.reducer {
            Reducer::Small { q } => [value % q, 0, 0, 0],
            Reducer::Montgomery { .. } => {
                let v = [value, 0, 0, 0];
                // q >= 2^63 here, so one subtraction suffices.
                if limbs::geq(&v, &self.0.q) {
                    limbs::sub(&v, &self.0.q).0
                } else {
                    v
                }
            }
        };
        FieldElement::from_raw(raw, self)
    }

    /// `value mod q`.
    pub fn element_from_biguint(&self, value: &BigUint) -> FieldElement {
        let reduced = value % self.value();
        FieldElement::from_raw(limbs::from_biguint(&reduced).unwrap(), self)
    }

    /// Parses a canonical 32-byte big-endian encoding; rejects values `>= q`.
    pub fn element_from_be_bytes(&self, bytes: &[u8; 32]) -> Result<FieldElement> {
        let raw = limbs::from_be_bytes(bytes);
        if limbs::geq(&raw, &self.0.q) {
            return Err(Error::NonCanonical);
        }
        Ok(FieldElement::from_raw(raw, self))
    }

    /// Parses a decimal string, requiring the value to be canonical.
    pub fn parse_element(&self, s: &str) -> Result<FieldElement> {
        let v = BigUint::from_str(s.trim()).map_err(|e| Error::Malformed(format!("{s:?}: {e}")))?;
        let raw = limbs::from_biguint(&v).ok_or(Error::NonCanonical)?;
        if limbs::geq(&raw, &self.0.q) {
            return Err(Error::NonCanonical);
        }
        Ok(FieldElement::from_raw(raw, self))
    }

    pub fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement::from_raw(self.sample_raw(rng), self)
    }

    pub(crate) fn same_as(&self, other: &FieldModulus) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.q == other.0.q
    }

    pub(crate) fn check_same(&self, other: &FieldModulus) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::ModulusMismatch)
        }
    }

    pub(crate) fn raw_q(&self) -> &Limbs {
        &self.0.q
    }

    // Raw kernels. Inputs must be canonical; outputs are canonical. None of
    // these touch the multiplication counter; callers account for it.

    #[inline(always)]
    pub(crate) fn add_raw(&self, a: &Limbs, b: &Limbs) -> Limbs {
        match self.0.reducer {
            Reducer::Small { q } => {
                let s = a[0] + b[0];
                [if s >= q { s - q } else { s }, 0, 0, 0]
            }
            Reducer::Montgomery { .. } => limbs::add_mod(a, b, &self.0.q),
        }
    }

    #[inline(always)]
    pub(crate) fn sub_raw(&self, a: &Limbs, b: &Limbs) -> Limbs {
        match self.0.reducer {
            Reducer::Small { q } => {
                let d = if a[0] >= b[0] { a[0] - b[0] } else { a[0] + q - b[0] };
                [d, 0, 0, 0]
            }
            Reducer::Montgomery { .. } => limbs::sub_mod(a, b, &self.0.q),
        }
    }

    #[inline(always)]
    pub(crate) fn mul_raw(&self, a: &Limbs, b: &Limbs) -> Limbs {
        match self.0.reducer {
            Reducer::Small { q } => [((a[0] as u128 * b[0] as u128) % q as u128) as u64, 0, 0, 0],
            Reducer::Montgomery { inv, ref r2 } => {
                let t = limbs::mont_mul(a, b, &self.0.q, inv);
                limbs::mont_mul(&t, r2, &self.0.q, inv)
            }
        }
    }

    /// `sum a[i] * b[i]`; slices must have equal length.
    #[inline]
    pub(crate) fn dot_raw(&self, a: &[Limbs], b: &[Limbs]) -> Limbs {
        debug_assert_eq!(a.len(), b.len());
        match self.0.reducer {
            Reducer::Small { q } => {
                let q = q as u128;
                let mut acc: u128 = 0;
                for (x, y) in a.iter().zip(b) {
                    acc += x[0] as u128 * y[0] as u128;
                    if acc >= 1 << 127 {
                        acc %= q;
                    }
                }
                [(acc % q) as u64, 0, 0, 0]
            }
            Reducer::Montgomery { inv, ref r2 } => {
                let q = &self.0.q;
                // Accumulate in the Montgomery domain, convert back once.
                let mut acc = limbs::ZERO;
                for (x, y) in a.iter().zip(b) {
                    acc = limbs::add_mod(&acc, &limbs::mont_mul(x, y, q, inv), q);
                }
                limbs::mont_mul(&acc, r2, q, inv)
            }
        }
    }

    /// Uniform sample from `[0, q)` by masked rejection. Draws one `u64` per
    /// limb of `q - 1`.
    pub(crate) fn sample_raw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Limbs {
        let bits = self.0.sample_bits;
        if bits == 0 {
            return limbs::ZERO;
        }
        let words = bits.div_ceil(64) as usize;
        let top_bits = bits - 64 * (words as u32 - 1);
        let top_mask = if top_bits == 64 { u64::MAX } else { (1u64 << top_bits) - 1 };
        loop {
            let mut v = limbs::ZERO;
            for w in v.iter_mut().take(words) {
                *w = rng.next_u64();
            }
            v[words - 1] &= top_mask;
            if !limbs::geq(&v, &self.0.q) {
                return v;
            }
        }
    }
}

impl PartialEq for FieldModulus {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl Eq for FieldModulus {}

impl fmt::Debug for FieldModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldModulus({})", self.value())
    }
}

impl fmt::Display for FieldModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for FieldModulus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let q = BigUint::from_str(s.trim()).map_err(|e| Error::Malformed(format!("modulus {s:?}: {e}")))?;
        Self::new(&q)
    }
}

impl Default for FieldModulus {
    fn default() -> Self {
        Self::default_256()
    }
}

/// An element of `Z_q`, always fully reduced.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    value: Limbs,
    modulus: FieldModulus,
}

impl FieldElement {
    pub(crate) fn from_raw(value: Limbs, modulus: &FieldModulus) -> Self {
        debug_assert!(!limbs::geq(&value, modulus.raw_q()));
        Self {
            value,
            modulus: modulus.clone(),
        }
    }

    pub fn modulus(&self) -> &FieldModulus {
        &self.modulus
    }

    pub fn value(&self) -> BigUint {
        limbs::to_biguint(&self.value)
    }

    pub fn as_u64(&self) -> Option<u64> {
        let v = &self.value;
        (v[1] == 0 && v[2] == 0 && v[3] == 0).then_some(v[0])
    }

    pub fn is_zero(&self) -> bool {
        limbs::is_zero(&self.value)
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        limbs::to_be_bytes(&self.value)
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        fe_add(self, other)
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.modulus.check_same(&other.modulus)?;
        Ok(Self::from_raw(self.modulus.sub_raw(&self.value, &other.value), &self.modulus))
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        fe_mul(self, other)
    }

    pub fn neg(&self) -> FieldElement {
        Self::from_raw(self.modulus.sub_raw(&limbs::ZERO, &self.value), &self.modulus)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

pub fn fe_add(a: &FieldElement, b: &FieldElement) -> Result<FieldElement> {
    a.modulus.check_same(&b.modulus)?;
    Ok(FieldElement::from_raw(a.modulus.add_raw(&a.value, &b.value), &a.modulus))
}

/// Counts as one multiplication.
pub fn fe_mul(a: &FieldElement, b: &FieldElement) -> Result<FieldElement> {
    a.modulus.check_same(&b.modulus)?;
    counter::record(1);
    Ok(FieldElement::from_raw(a.modulus.mul_raw(&a.value, &b.value), &a.modulus))
}
