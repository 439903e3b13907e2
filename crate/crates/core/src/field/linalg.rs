use std::fmt;

use rand::RngCore;

use super::counter;
use super::limbs::{self, Limbs};
use super::{FieldElement, FieldModulus, Reducer};
use crate::error::{Error, Result};

/// A vector over `Z_q` with positive dimension.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldVector {
    modulus: FieldModulus,
    entries: Vec<Limbs>,
}

/// A dense row-major matrix over `Z_q` with positive dimensions.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    modulus: FieldModulus,
    rows: usize,
    cols: usize,
    entries: Vec<Limbs>,
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl FieldVector {
    pub fn new(modulus: &FieldModulus, elements: Vec<FieldElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let mut entries = Vec::with_capacity(elements.len());
        for e in elements {
            modulus.check_same(e.modulus())?;
            entries.push(e.value);
        }
        Ok(Self {
            modulus: modulus.clone(),
            entries,
        })
    }

    /// Each value is reduced mod `q`.
    pub fn from_u64s(modulus: &FieldModulus, values: &[u64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let entries = values.iter().map(|&v| modulus.element(v).value).collect();
        Ok(Self {
            modulus: modulus.clone(),
            entries,
        })
    }

    pub fn zeros(modulus: &FieldModulus, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self::from_raw(modulus, vec![limbs::ZERO; dim]))
    }

    /// The standard basis vector `e_index` (0-based index).
    pub fn unit(modulus: &FieldModulus, dim: usize, index: usize) -> Result<Self> {
        let mut v = Self::zeros(modulus, dim)?;
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, len: dim });
        }
        v.entries[index] = modulus.one().value;
        Ok(v)
    }

    pub(crate) fn from_raw(modulus: &FieldModulus, entries: Vec<Limbs>) -> Self {
        debug_assert!(!entries.is_empty());
        Self {
            modulus: modulus.clone(),
            entries,
        }
    }

    pub(crate) fn raw(&self) -> &[Limbs] {
        &self.entries
    }

    pub fn modulus(&self) -> &FieldModulus {
        &self.modulus
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize) -> Option<FieldElement> {
        self.entries.get(i).map(|v| FieldElement::from_raw(*v, &self.modulus))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = FieldElement> + '_ {
        self.entries.iter().map(|v| FieldElement::from_raw(*v, &self.modulus))
    }

    /// Entries as `u64`, if every entry fits.
    pub fn to_u64s(&self) -> Option<Vec<u64>> {
        self.iter().map(|e| e.as_u64()).collect()
    }

    pub fn add(&self, other: &FieldVector) -> Result<FieldVector> {
        self.modulus.check_same(&other.modulus)?;
        check_dim(self.dim(), other.dim())?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| self.modulus.add_raw(a, b))
            .collect();
        Ok(Self::from_raw(&self.modulus, entries))
    }

    pub fn sub(&self, other: &FieldVector) -> Result<FieldVector> {
        self.modulus.check_same(&other.modulus)?;
        check_dim(self.dim(), other.dim())?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| self.modulus.sub_raw(a, b))
            .collect();
        Ok(Self::from_raw(&self.modulus, entries))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(limbs::is_zero)
    }
}

impl fmt::Debug for FieldVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl FieldMatrix {
    /// Builds a matrix from row-major elements.
    pub fn new(modulus: &FieldModulus, rows: usize, cols: usize, elements: Vec<FieldElement>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        check_dim(rows * cols, elements.len())?;
        let mut entries = Vec::with_capacity(elements.len());
        for e in elements {
            modulus.check_same(e.modulus())?;
            entries.push(e.value);
        }
        Ok(Self {
            modulus: modulus.clone(),
            rows,
            cols,
            entries,
        })
    }

    /// Row-major values, each reduced mod `q`.
    pub fn from_u64s(modulus: &FieldModulus, rows: usize, cols: usize, values: &[u64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        check_dim(rows * cols, values.len())?;
        let entries = values.iter().map(|&v| modulus.element(v).value).collect();
        Ok(Self {
            modulus: modulus.clone(),
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(modulus: &FieldModulus, rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim(cols, row.len())?;
            flat.extend_from_slice(row);
        }
        Self::from_u64s(modulus, rows.len(), cols, &flat)
    }

    pub fn zeros(modulus: &FieldModulus, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self::from_raw(modulus, rows, cols, vec![limbs::ZERO; rows * cols]))
    }

    pub fn identity(modulus: &FieldModulus, n: usize) -> Result<Self> {
        let mut m = Self::zeros(modulus, n, n)?;
        let one = modulus.one().value;
        for i in 0..n {
            m.entries[i * n + i] = one;
        }
        Ok(m)
    }

    pub(crate) fn from_raw(modulus: &FieldModulus, rows: usize, cols: usize, entries: Vec<Limbs>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        Self {
            modulus: modulus.clone(),
            rows,
            cols,
            entries,
        }
    }

    pub(crate) fn raw(&self) -> &[Limbs] {
        &self.entries
    }

    pub(crate) fn raw_row(&self, i: usize) -> &[Limbs] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn modulus(&self) -> &FieldModulus {
        &self.modulus
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// 0-based entry access.
    pub fn get(&self, i: usize, j: usize) -> Option<FieldElement> {
        if i >= self.rows || j >= self.cols {
            return None;
        }
        Some(FieldElement::from_raw(self.entries[i * self.cols + j], &self.modulus))
    }

    /// Row-major iteration over all entries.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = FieldElement> + '_ {
        self.entries.iter().map(|v| FieldElement::from_raw(*v, &self.modulus))
    }

    pub fn row(&self, i: usize) -> Option<FieldVector> {
        (i < self.rows).then(|| FieldVector::from_raw(&self.modulus, self.raw_row(i).to_vec()))
    }

    pub fn column(&self, j: usize) -> Option<FieldVector> {
        (j < self.cols).then(|| {
            FieldVector::from_raw(&self.modulus, (0..self.rows).map(|i| self.entries[i * self.cols + j]).collect())
        })
    }

    pub fn to_u64_rows(&self) -> Option<Vec<Vec<u64>>> {
        (0..self.rows)
            .map(|i| self.raw_row(i).iter().map(|v| FieldElement::from_raw(*v, &self.modulus).as_u64()).collect())
            .collect()
    }

    fn check_same_shape(&self, other: &FieldMatrix) -> Result<()> {
        self.modulus.check_same(&other.modulus)?;
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)
    }

    pub fn add(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other);
        Ok(out)
    }

    pub fn sub(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.sub_assign_unchecked(other);
        Ok(out)
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &FieldMatrix) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a = self.modulus.add_raw(a, b);
        }
    }

    pub(crate) fn sub_assign_unchecked(&mut self, other: &FieldMatrix) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a = self.modulus.sub_raw(a, b);
        }
    }
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<FieldElement>> = (0..self.rows)
            .map(|i| self.raw_row(i).iter().map(|v| FieldElement::from_raw(*v, &self.modulus)).collect())
            .collect();
        write!(f, "FieldMatrix{rows:?}")
    }
}

/// `sum u[i] * v[i]`. Counts `dim` multiplications.
pub fn dot(u: &FieldVector, v: &FieldVector) -> Result<FieldElement> {
    u.modulus.check_same(&v.modulus)?;
    check_dim(u.dim(), v.dim())?;
    counter::record(u.dim() as u64);
    Ok(FieldElement::from_raw(u.modulus.dot_raw(&u.entries, &v.entries), &u.modulus))
}

/// `F x`. Counts `rows * cols` multiplications.
pub fn mat_vec_mul(f: &FieldMatrix, x: &FieldVector) -> Result<FieldVector> {
    f.modulus.check_same(&x.modulus)?;
    check_dim(f.cols, x.dim())?;
    counter::record((f.rows * f.cols) as u64);
    let out = (0..f.rows).map(|i| f.modulus.dot_raw(f.raw_row(i), &x.entries)).collect();
    Ok(FieldVector::from_raw(&f.modulus, out))
}

/// `r F` (row vector times matrix). Counts `rows * cols` multiplications.
pub fn vec_mat_mul(r: &FieldVector, f: &FieldMatrix) -> Result<FieldVector> {
    f.modulus.check_same(&r.modulus)?;
    check_dim(f.rows, r.dim())?;
    counter::record((f.rows * f.cols) as u64);
    let q = f.modulus.raw_q();
    let mut acc = vec![limbs::ZERO; f.cols];
    match f.modulus.0.reducer {
        Reducer::Small { .. } => {
            for (i, s) in r.entries.iter().enumerate() {
                for (a, x) in acc.iter_mut().zip(f.raw_row(i)) {
                    *a = f.modulus.add_raw(a, &f.modulus.mul_raw(s, x));
                }
            }
        }
        Reducer::Montgomery { inv, ref r2 } => {
            // Accumulate in the Montgomery domain; one conversion per column.
            for (i, s) in r.entries.iter().enumerate() {
                for (a, x) in acc.iter_mut().zip(f.raw_row(i)) {
                    *a = limbs::add_mod(a, &limbs::mont_mul(s, x, q, inv), q);
                }
            }
            for a in acc.iter_mut() {
                *a = limbs::mont_mul(a, r2, q, inv);
            }
        }
    }
    Ok(FieldVector::from_raw(&f.modulus, acc))
}

/// Uniform vector over `Z_q^dim`.
pub fn random_vector<R: RngCore + ?Sized>(dim: usize, modulus: &FieldModulus, rng: &mut R) -> Result<FieldVector> {
    if dim == 0 {
        return Err(Error::EmptyDimension);
    }
    Ok(FieldVector::from_raw(modulus, (0..dim).map(|_| modulus.sample_raw(rng)).collect()))
}

/// Uniform matrix over `Z_q^{rows x cols}`, sampled row-major.
pub fn random_matrix<R: RngCore + ?Sized>(
    rows: usize,
    cols: usize,
    modulus: &FieldModulus,
    rng: &mut R,
) -> Result<FieldMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyDimension);
    }
    let entries = (0..rows * cols).map(|_| modulus.sample_raw(rng)).collect();
    Ok(FieldMatrix::from_raw(modulus, rows, cols, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::count_muls;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: u64) -> FieldModulus {
        FieldModulus::from_u64(n).unwrap()
    }

    fn vec_of(m: &FieldModulus, v: &[u64]) -> FieldVector {
        FieldVector::from_u64s(m, v).unwrap()
    }

    #[test]
    fn dot_examples() {
        let f7 = q(7);
        assert_eq!(dot(&vec_of(&f7, &[1, 2, 3]), &vec_of(&f7, &[4, 5, 6])).unwrap().as_u64(), Some(4));
        assert_eq!(dot(&vec_of(&f7, &[0, 0]), &vec_of(&f7, &[3, 5])).unwrap().as_u64(), Some(0));
        let f101 = q(101);
        assert_eq!(dot(&vec_of(&f101, &[10, 10]), &vec_of(&f101, &[10, 10])).unwrap().as_u64(), Some(99));
        assert_eq!(
            dot(&vec_of(&f7, &[1, 2]), &vec_of(&f7, &[1])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn mat_vec_examples() {
        let f7 = q(7);
        let f = FieldMatrix::from_rows(&f7, &[vec![1, 2], vec![3, 4]]).unwrap();
        let y = mat_vec_mul(&f, &vec_of(&f7, &[1, 1])).unwrap();
        assert_eq!(y.to_u64s().unwrap(), [3, 0]);
        let zero = FieldMatrix::zeros(&f7, 2, 2).unwrap();
        assert_eq!(mat_vec_mul(&zero, &vec_of(&f7, &[4, 6])).unwrap().to_u64s().unwrap(), [0, 0]);
        let id = FieldMatrix::identity(&f7, 2).unwrap();
        assert_eq!(mat_vec_mul(&id, &vec_of(&f7, &[5, 6])).unwrap().to_u64s().unwrap(), [5, 6]);
        assert!(mat_vec_mul(&id, &vec_of(&f7, &[5, 6, 1])).is_err());
    }

    #[test]
    fn vec_mat_examples() {
        let f7 = q(7);
        let f = FieldMatrix::from_rows(&f7, &[vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(vec_mat_mul(&vec_of(&f7, &[1, 1]), &f).unwrap().to_u64s().unwrap(), [4, 6]);
        assert_eq!(vec_mat_mul(&vec_of(&f7, &[0, 0]), &f).unwrap().to_u64s().unwrap(), [0, 0]);
        assert_eq!(vec_mat_mul(&vec_of(&f7, &[1, 0]), &f).unwrap().to_u64s().unwrap(), [1, 2]);
        assert!(vec_mat_mul(&vec_of(&f7, &[1]), &f).is_err());
    }

    #[test]
    fn associativity_exhaustive_q3() {
        // dot(rF, x) == dot(r, Fx) over every 2x2 F, x, r at q = 3.
        let f3 = q(3);
        let all2: Vec<[u64; 2]> = (0..9).map(|i| [i % 3, i / 3]).collect();
        for fi in 0..81u64 {
            let vals: Vec<u64> = (0..4).map(|k| (fi / 3u64.pow(k)) % 3).collect();
            let f = FieldMatrix::from_u64s(&f3, 2, 2, &vals).unwrap();
            for x in &all2 {
                let x = vec_of(&f3, x);
                let fx = mat_vec_mul(&f, &x).unwrap();
                for r in &all2 {
                    let r = vec_of(&f3, r);
                    let lhs = dot(&vec_mat_mul(&r, &f).unwrap(), &x).unwrap();
                    let rhs = dot(&r, &fx).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    fn naive_mat_vec(f: &FieldMatrix, x: &FieldVector) -> Vec<BigUint> {
        // Integer products summed over Z, reduced once.
        let q = f.modulus().value();
        (0..f.rows())
            .map(|i| {
                let s: BigUint = (0..f.cols()).map(|j| f.get(i, j).unwrap().value() * x.get(j).unwrap().value()).sum();
                s % &q
            })
            .collect()
    }

    #[test]
    fn mat_vec_matches_bigint_oracle_256() {
        let m = FieldModulus::default_256();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (rows, cols) in [(1, 1), (3, 5), (8, 8), (17, 4)] {
            let f = random_matrix(rows, cols, &m, &mut rng).unwrap();
            let x = random_vector(cols, &m, &mut rng).unwrap();
            let got: Vec<BigUint> = mat_vec_mul(&f, &x).unwrap().iter().map(|e| e.value()).collect();
            assert_eq!(got, naive_mat_vec(&f, &x));
            let r = random_vector(rows, &m, &mut rng).unwrap();
            let lhs = dot(&vec_mat_mul(&r, &f).unwrap(), &x).unwrap();
            let rhs = dot(&r, &mat_vec_mul(&f, &x).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    proptest! {
        #[test]
        fn mat_vec_matches_bigint_oracle_small(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6,
                                               qi in 0usize..4) {
            let m = q([2, 7, 1009, (1 << 61) - 1][qi]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_matrix(rows, cols, &m, &mut rng).unwrap();
            let x = random_vector(cols, &m, &mut rng).unwrap();
            let got: Vec<BigUint> = mat_vec_mul(&f, &x).unwrap().iter().map(|e| e.value()).collect();
            prop_assert_eq!(got, naive_mat_vec(&f, &x));
        }
    }

    #[test]
    fn mat_vec_counts_rows_times_cols() {
        let m = q(101);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_matrix(4, 7, &m, &mut rng).unwrap();
        let x = random_vector(7, &m, &mut rng).unwrap();
        let (_, n) = count_muls(|| mat_vec_mul(&f, &x).unwrap());
        assert_eq!(n, 28);
        let r = random_vector(4, &m, &mut rng).unwrap();
        let (_, n) = count_muls(|| vec_mat_mul(&r, &f).unwrap());
        assert_eq!(n, 28);
        let (_, n) = count_muls(|| dot(&x, &x).unwrap());
        assert_eq!(n, 7);
    }

    #[test]
    fn random_vector_is_deterministic_under_seed() {
        let m = q(7);
        let a = random_vector(3, &m, &mut ChaCha8Rng::seed_from_u64(0x50)).unwrap();
        let b = random_vector(3, &m, &mut ChaCha8Rng::seed_from_u64(0x50)).unwrap();
        assert_eq!(a, b);
        assert!(random_vector(0, &m, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn random_bits_are_balanced_mod_2() {
        // Binomial(10^4, 1/2): [0.47, 0.53] is more than 6 standard deviations wide.
        let m = q(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ones: u64 = (0..10_000).map(|_| random_vector(1, &m, &mut rng).unwrap().to_u64s().unwrap()[0]).sum();
        let freq = ones as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&freq), "{freq}");
    }

    #[test]
    fn random_elements_pass_chi_square_mod_5() {
        let m = q(5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut counts = [0u64; 5];
        for _ in 0..100_000 {
            counts[random_vector(1, &m, &mut rng).unwrap().to_u64s().unwrap()[0] as usize] += 1;
        }
        assert!(crate::testing::chi_square_uniform(&counts) < crate::testing::CHI2_4DF_999);
    }

    #[test]
    fn outputs_are_canonical_256() {
        let m = FieldModulus::default_256();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_matrix(6, 6, &m, &mut rng).unwrap();
        let x = random_vector(6, &m, &mut rng).unwrap();
        for e in mat_vec_mul(&f, &x).unwrap().iter() {
            assert!(e.value() < m.value());
        }
    }
}
