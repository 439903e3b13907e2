//! Polynomial evaluation as a two-stage computation `f(pt) = y . (F x)`.
//!
//! `F` depends only on the coefficients, so it is shared with the servers
//! once; `x` and `y` are built from the evaluation point. The client
//! delegates `F x` and finishes with one inner product.
//!
//! Index conventions:
//! - univariate: `F[r][c] = f_{rm + c}` with `m = ceil(sqrt(deg + 1))`,
//!   `x = (1, t, .., t^(m-1))`, `y = (1, t^m, .., t^(m^2 - m))`.
//! - bivariate: `F[i][j] = f_{i,j}`, the coefficient of `s^i t^j` at point
//!   `(s, t)`; `y = (1, s, .., s^d)` and `x = (1, t, .., t^d)`.
//! - quadratic: `F[i][j] = f_{i,j}`, the coefficient of `x_i x_j`;
//!   `x = y = point`.
//! - bounded multivariate: coefficients are a flat tensor in mixed-radix
//!   order with the last variable fastest. Exponents run over `1..=d`, or
//!   `0..=d` with [`BoundedOptions::include_constant`]. The first
//!   `floor(m/2)` variables index rows and `y`; the rest index columns and
//!   `x`. `F` is the tensor reshaped.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::covering::CoveringScheme;
use crate::error::{Error, Result};
use crate::field::{dot, FieldElement, FieldMatrix, FieldModulus, FieldVector};
use crate::protocol::{key_gen, Client, FunctionKeyMaterial, LocalServers, Servers, Verified};

/// Default cap on the number of coefficients of a bounded multivariate
/// polynomial.
pub const DEFAULT_TENSOR_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Univariate,
    Bivariate,
    Quadratic,
    BoundedMultivariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundedOptions {
    /// Let exponents start at 0 instead of 1.
    pub include_constant: bool,
    /// Largest accepted number of coefficients.
    pub limit: usize,
}

impl Default for BoundedOptions {
    fn default() -> Self {
        Self {
            include_constant: false,
            limit: DEFAULT_TENSOR_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    Univariate { m: usize },
    Bivariate { d: usize },
    Quadratic { d: usize },
    Bounded { vars: usize, ell: usize, first: u64, span: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoStageDecomposition {
    f: FieldMatrix,
    layout: Layout,
}

fn check_all(modulus: &FieldModulus, values: &[FieldElement]) -> Result<()> {
    values.iter().try_for_each(|v| modulus.check_same(v.modulus()))
}

fn square_grid(grid: &[Vec<FieldElement>]) -> Result<usize> {
    let n = grid.len();
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    for row in grid {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
    }
    Ok(n)
}

/// `t^first, t^(first+step), ..`, `count` terms.
fn powers(t: &FieldElement, first: u64, step: usize, count: usize) -> Result<Vec<FieldElement>> {
    let modulus = t.modulus();
    let pow = |e: u64| -> Result<FieldElement> {
        let mut acc = modulus.one();
        let mut base = t.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            base = base.mul(&base)?;
            e >>= 1;
        }
        Ok(acc)
    };
    let stride = pow(step as u64)?;
    let mut out = Vec::with_capacity(count);
    let mut cur = pow(first)?;
    for i in 0..count {
        if i > 0 {
            cur = cur.mul(&stride)?;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// All monomials over `vars` in mixed-radix order, last variable fastest.
fn monomials(vars: &[FieldElement], first: u64, span: usize) -> Result<Vec<FieldElement>> {
    let modulus = vars[0].modulus();
    let mut out = vec![modulus.one()];
    for v in vars {
        let pw = powers(v, first, 1, span)?;
        let mut next = Vec::with_capacity(out.len() * span);
        for prefix in &out {
            for p in &pw {
                next.push(prefix.mul(p)?);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Coefficients `f_0..f_d` of `f(t) = sum f_i t^i`.
pub fn decompose_univariate(modulus: &FieldModulus, coeffs: &[FieldElement]) -> Result<TwoStageDecomposition> {
    if coeffs.is_empty() {
        return Err(Error::EmptyDimension);
    }
    check_all(modulus, coeffs)?;
    let mut m = 1;
    while m * m < coeffs.len() {
        m += 1;
    }
    let mut padded = coeffs.to_vec();
    padded.resize(m * m, modulus.zero());
    Ok(TwoStageDecomposition {
        f: FieldMatrix::new(modulus, m, m, padded)?,
        layout: Layout::Univariate { m },
    })
}

/// `grid[i][j]` is the coefficient of `s^i t^j`, `0 <= i, j <= d`.
pub fn decompose_bivariate(modulus: &FieldModulus, grid: &[Vec<FieldElement>]) -> Result<TwoStageDecomposition> {
    let n = square_grid(grid)?;
    let flat: Vec<FieldElement> = grid.concat();
    check_all(modulus, &flat)?;
    Ok(TwoStageDecomposition {
        f: FieldMatrix::new(modulus, n, n, flat)?,
        layout: Layout::Bivariate { d: n - 1 },
    })
}

/// `grid[i][j]` is the coefficient of `x_{i+1} x_{j+1}`.
pub fn decompose_quadratic(modulus: &FieldModulus, grid: &[Vec<FieldElement>]) -> Result<TwoStageDecomposition> {
    let n = square_grid(grid)?;
    let flat: Vec<FieldElement> = grid.concat();
    check_all(modulus, &flat)?;
    Ok(TwoStageDecomposition {
        f: FieldMatrix::new(modulus, n, n, flat)?,
        layout: Layout::Quadratic { d: n },
    })
}

/// `vars` variables, each with exponent at most `degree`. `coeffs` is the
/// flat tensor (see the module docs for the ordering).
pub fn decompose_bounded_multivariate(
    modulus: &FieldModulus,
    vars: usize,
    degree: usize,
    coeffs: &[FieldElement],
    options: BoundedOptions,
) -> Result<TwoStageDecomposition> {
    if vars < 2 {
        return Err(Error::Malformed(format!("need at least 2 variables, got {vars}")));
    }
    let span = if options.include_constant { degree + 1 } else { degree };
    if span == 0 {
        return Err(Error::EmptyDimension);
    }
    let size = u32::try_from(vars).ok().and_then(|v| span.checked_pow(v)).unwrap_or(usize::MAX);
    if size > options.limit {
        return Err(Error::SizeBound {
            size,
            limit: options.limit,
        });
    }
    if coeffs.len() != size {
        return Err(Error::DimensionMismatch { expected: size, found: coeffs.len() });
    }
    check_all(modulus, coeffs)?;
    let ell = vars / 2;
    let rows = span.pow(ell as u32);
    Ok(TwoStageDecomposition {
        f: FieldMatrix::new(modulus, rows, size / rows, coeffs.to_vec())?,
        layout: Layout::Bounded {
            vars,
            ell,
            first: u64::from(!options.include_constant),
            span,
        },
    })
}

impl TwoStageDecomposition {
    pub fn family(&self) -> Family {
        match self.layout {
            Layout::Univariate { .. } => Family::Univariate,
            Layout::Bivariate { .. } => Family::Bivariate,
            Layout::Quadratic { .. } => Family::Quadratic,
            Layout::Bounded { .. } => Family::BoundedMultivariate,
        }
    }

    /// The first-stage matrix.
    pub fn matrix(&self) -> &FieldMatrix {
        &self.f
    }

    pub fn modulus(&self) -> &FieldModulus {
        self.f.modulus()
    }

    /// Number of coordinates of an evaluation point.
    pub fn arity(&self) -> usize {
        match self.layout {
            Layout::Univariate { .. } => 1,
            Layout::Bivariate { .. } => 2,
            Layout::Quadratic { d } => d,
            Layout::Bounded { vars, .. } => vars,
        }
    }

    fn check_point(&self, point: &[FieldElement]) -> Result<()> {
        if point.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                found: point.len(),
            });
        }
        check_all(self.modulus(), point)
    }

    /// The first-stage input vector.
    pub fn build_x(&self, point: &[FieldElement]) -> Result<FieldVector> {
        self.check_point(point)?;
        let entries = match self.layout {
            Layout::Univariate { m } => powers(&point[0], 0, 1, m)?,
            Layout::Bivariate { d } => powers(&point[1], 0, 1, d + 1)?,
            Layout::Quadratic { .. } => point.to_vec(),
            Layout::Bounded { ell, first, span, .. } => monomials(&point[ell..], first, span)?,
        };
        FieldVector::new(self.modulus(), entries)
    }

    /// The second-stage left vector.
    pub fn build_y(&self, point: &[FieldElement]) -> Result<FieldVector> {
        self.check_point(point)?;
        let entries = match self.layout {
            Layout::Univariate { m } => powers(&point[0], 0, m, m)?,
            Layout::Bivariate { d } => powers(&point[0], 0, 1, d + 1)?,
            Layout::Quadratic { .. } => point.to_vec(),
            Layout::Bounded { ell, first, span, .. } => monomials(&point[..ell], first, span)?,
        };
        FieldVector::new(self.modulus(), entries)
    }

    /// The second stage: `y . u` where `u = F x`.
    pub fn finish(&self, point: &[FieldElement], u: &FieldVector) -> Result<FieldElement> {
        dot(&self.build_y(point)?, u)
    }

    /// Evaluates without delegation.
    pub fn evaluate_local(&self, point: &[FieldElement]) -> Result<FieldElement> {
        let u = crate::field::mat_vec_mul(&self.f, &self.build_x(point)?)?;
        self.finish(point, &u)
    }
}

/// Evaluates one decomposition at many points, reusing one key generation.
#[derive(Debug)]
pub struct PolyDelegator<S> {
    decomposition: TwoStageDecomposition,
    client: Client<S>,
}

impl PolyDelegator<LocalServers> {
    /// Runs key generation for `F` and simulates the servers in-process.
    pub fn local<R: RngCore + ?Sized>(
        decomposition: TwoStageDecomposition,
        scheme: &CoveringScheme,
        rng: &mut R,
    ) -> Result<Self> {
        let keys = key_gen(decomposition.matrix(), scheme, rng)?;
        let servers = LocalServers::new(scheme, &keys);
        Ok(Self::new(decomposition, scheme.clone(), keys, servers))
    }
}

impl<S: Servers> PolyDelegator<S> {
    /// `keys` must come from key generation on `decomposition.matrix()`.
    pub fn new(decomposition: TwoStageDecomposition, scheme: CoveringScheme, keys: FunctionKeyMaterial, servers: S) -> Self {
        Self {
            decomposition,
            client: Client::new(scheme, keys, servers),
        }
    }

    pub fn decomposition(&self) -> &TwoStageDecomposition {
        &self.decomposition
    }

    pub fn client(&self) -> &Client<S> {
        &self.client
    }

    pub fn client_mut(&mut self) -> &mut Client<S> {
        &mut self.client
    }

    pub fn evaluate<R: RngCore + ?Sized>(
        &mut self,
        point: &[FieldElement],
        rng: &mut R,
    ) -> std::result::Result<Verified<FieldElement>, S::Error> {
        let x = self.decomposition.build_x(point)?;
        match self.client.delegate(&x, rng)? {
            Verified::Accepted(u) => Ok(Verified::Accepted(self.decomposition.finish(point, &u)?)),
            Verified::Rejected(r) => Ok(Verified::Rejected(r)),
        }
    }
}

/// One-shot delegated evaluation with honest in-process servers.
pub fn evaluate_delegated<R: RngCore + ?Sized>(
    decomposition: &TwoStageDecomposition,
    point: &[FieldElement],
    scheme: &CoveringScheme,
    rng: &mut R,
) -> Result<Verified<FieldElement>> {
    PolyDelegator::local(decomposition.clone(), scheme, rng)?.evaluate(point, rng)
}

/// A JSON polynomial description. Coefficients are decimal strings or
/// integers; grids are nested arrays and the bounded multivariate tensor
/// may be nested or flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PolynomialSpec {
    Univariate {
        coeffs: serde_json::Value,
    },
    Bivariate {
        coeffs: serde_json::Value,
    },
    Quadratic {
        coeffs: serde_json::Value,
    },
    BoundedMultivariate {
        vars: usize,
        degree: usize,
        coeffs: serde_json::Value,
        #[serde(default)]
        include_constant: bool,
    },
}

fn json_element(modulus: &FieldModulus, v: &serde_json::Value) -> Result<FieldElement> {
    match v {
        serde_json::Value::Number(n) => n
            .as_u64()
            .map(|n| modulus.element(n))
            .ok_or_else(|| Error::Malformed(format!("not a non-negative integer: {n}"))),
        serde_json::Value::String(s) => modulus.parse_element(s),
        other => Err(Error::Malformed(format!("expected a coefficient, got {other}"))),
    }
}

fn json_flat(modulus: &FieldModulus, v: &serde_json::Value, out: &mut Vec<FieldElement>) -> Result<()> {
    match v {
        serde_json::Value::Array(items) => items.iter().try_for_each(|item| json_flat(modulus, item, out)),
        leaf => {
            out.push(json_element(modulus, leaf)?);
            Ok(())
        }
    }
}

fn json_grid(modulus: &FieldModulus, v: &serde_json::Value) -> Result<Vec<Vec<FieldElement>>> {
    let rows = v.as_array().ok_or_else(|| Error::Malformed("expected an array of rows".into()))?;
    rows.iter()
        .map(|row| {
            let row = row.as_array().ok_or_else(|| Error::Malformed("expected a row array".into()))?;
            row.iter().map(|c| json_element(modulus, c)).collect()
        })
        .collect()
}

impl PolynomialSpec {
    pub fn decompose(&self, modulus: &FieldModulus) -> Result<TwoStageDecomposition> {
        match self {
            PolynomialSpec::Univariate { coeffs } => {
                let mut flat = Vec::new();
                json_flat(modulus, coeffs, &mut flat)?;
                decompose_univariate(modulus, &flat)
            }
            PolynomialSpec::Bivariate { coeffs } => decompose_bivariate(modulus, &json_grid(modulus, coeffs)?),
            PolynomialSpec::Quadratic { coeffs } => decompose_quadratic(modulus, &json_grid(modulus, coeffs)?),
            PolynomialSpec::BoundedMultivariate {
                vars,
                degree,
                coeffs,
                include_constant,
            } => {
                let mut flat = Vec::new();
                json_flat(modulus, coeffs, &mut flat)?;
                let options = BoundedOptions {
                    include_constant: *include_constant,
                    ..BoundedOptions::default()
                };
                decompose_bounded_multivariate(modulus, *vars, *degree, &flat, options)
            }
        }
    }
}
