//! Additive secret sharing over `Z_q`.
//!
//! The first `n - 1` shares are uniform and the last one absorbs the secret,
//! so any proper subset of shares is independent of it. Share indices are
//! 1-based in the protocol layer; here they are plain positions.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::{random_matrix, random_vector, FieldMatrix, FieldVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixShares {
    shares: Vec<FieldMatrix>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorShares {
    shares: Vec<FieldVector>,
}

impl MatrixShares {
    pub fn shares(&self) -> &[FieldMatrix] {
        &self.shares
    }

    pub fn into_shares(self) -> Vec<FieldMatrix> {
        self.shares
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }
}

impl VectorShares {
    pub fn shares(&self) -> &[FieldVector] {
        &self.shares
    }

    pub fn into_shares(self) -> Vec<FieldVector> {
        self.shares
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }
}

/// Splits `f` into `count >= 2` uniformly random matrices summing to `f`.
/// Draws `(count - 1) * rows * cols` field elements, row-major per share.
pub fn share_matrix<R: RngCore + ?Sized>(f: &FieldMatrix, count: usize, rng: &mut R) -> Result<MatrixShares> {
    if count < 2 {
        return Err(Error::ShareCount(count));
    }
    let mut last = f.clone();
    let mut shares = Vec::with_capacity(count);
    for _ in 0..count - 1 {
        let s = random_matrix(f.rows(), f.cols(), f.modulus(), rng)?;
        last.sub_assign_unchecked(&s);
        shares.push(s);
    }
    shares.push(last);
    Ok(MatrixShares { shares })
}

/// Splits `x` into `count >= 2` uniformly random vectors summing to `x`.
pub fn share_vector<R: RngCore + ?Sized>(x: &FieldVector, count: usize, rng: &mut R) -> Result<VectorShares> {
    if count < 2 {
        return Err(Error::ShareCount(count));
    }
    let mut last = x.clone();
    let mut shares = Vec::with_capacity(count);
    for _ in 0..count - 1 {
        let s = random_vector(x.dim(), x.modulus(), rng)?;
        last = last.sub(&s)?;
        shares.push(s);
    }
    shares.push(last);
    Ok(VectorShares { shares })
}

/// Entrywise sum of matrix shares.
pub fn reconstruct_matrix<'a>(shares: impl IntoIterator<Item = &'a FieldMatrix>) -> Result<FieldMatrix> {
    let mut it = shares.into_iter();
    let mut acc = it.next().ok_or(Error::NoShares)?.clone();
    for s in it {
        acc = acc.add(s)?;
    }
    Ok(acc)
}

/// Entrywise sum of vector shares.
pub fn reconstruct_vector<'a>(shares: impl IntoIterator<Item = &'a FieldVector>) -> Result<FieldVector> {
    let mut it = shares.into_iter();
    let mut acc = it.next().ok_or(Error::NoShares)?.clone();
    for s in it {
        acc = acc.add(s)?;
    }
    Ok(acc)
}
