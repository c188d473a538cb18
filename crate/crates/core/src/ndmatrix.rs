//! Nonnegative square matrices: spectral radius, induced sup norm, Neumann
//! series, Perron vectors and irreducibility.
//!
//! The spectral radius of a nonnegative matrix is its Perron root, which is
//! computed here without a general eigensolver. Each strongly connected block
//! of the sparsity graph is handled by shifted power iteration on the
//! transpose, bracketed by the Collatz-Wielandt bounds
//!
//! ```text
//! min_i (u'A)_i / u_i  <=  rho(A)  <=  max_i (u'A)_i / u_i
//! ```
//!
//! which hold for every positive vector `u`. The spectral radius of the whole
//! matrix is the maximum over its diagonal blocks.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums of a stochastic matrix must equal one within this tolerance.
pub const STOCHASTIC_ROW_TOL: f64 = 1e-12;

/// Spectral radii within this distance of one are treated as one.
pub const UNIT_RHO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix must have at least one row")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("matrix is reducible")]
    NotIrreducible,
    #[error("spectral radius {} >= 1: Neumann series diverges", .certificate.rho)]
    Divergent { certificate: SpectralCertificate },
    #[error("Neumann series did not reach residual {tol} after {terms} terms")]
    SeriesNotConverged { terms: u64, tol: f64 },
    #[error("I - B is numerically singular")]
    Singular,
    #[error("series and direct inverse disagree by {max_diff} at ({row}, {col})")]
    Disagreement { row: usize, col: usize, max_diff: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Square matrix with nonnegative, finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct NonnegativeMatrix {
    inner: DMatrix<f64>,
}

impl NonnegativeMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        let n = rows.len();
        if n == 0 {
            return Err(MatrixError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MatrixError::NotSquare {
                    row,
                    len: r.len(),
                    expected: n,
                });
            }
        }
        Self::from_dmatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self, MatrixError> {
        if inner.nrows() == 0 {
            return Err(MatrixError::Empty);
        }
        if inner.nrows() != inner.ncols() {
            return Err(MatrixError::NotSquare {
                row: 0,
                len: inner.ncols(),
                expected: inner.nrows(),
            });
        }
        for i in 0..inner.nrows() {
            for j in 0..inner.ncols() {
                let value = inner[(i, j)];
                if !(value.is_finite() && value >= 0.0) {
                    return Err(MatrixError::InvalidEntry {
                        row: i,
                        col: j,
                        value,
                    });
                }
            }
        }
        Ok(Self { inner })
    }

    pub fn zeros(n: usize) -> Result<Self, MatrixError> {
        Self::from_dmatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Result<Self, MatrixError> {
        Self::from_dmatrix(DMatrix::identity(n, n))
    }

    /// Builds `C_ij = f(i, j)`; fails if any produced entry is negative.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self, MatrixError> {
        Self::from_dmatrix(DMatrix::from_fn(n, n, f))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    /// `c * B`; `c` must be nonnegative.
    pub fn scaled(&self, c: f64) -> Result<Self, MatrixError> {
        Self::from_dmatrix(&self.inner * c)
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, MatrixError> {
        self.check_dim(other.dim())?;
        Self::from_dmatrix(self.inner.component_mul(&other.inner))
    }

    /// `B v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "vector length must match matrix dimension");
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inner[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `u' B`, returned as a column vector.
    pub fn left_mul_vec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.dim(), "vector length must match matrix dimension");
        (0..self.dim())
            .map(|j| (0..self.dim()).map(|i| u[i] * self.inner[(i, j)]).sum())
            .collect()
    }

    /// Induced sup norm (maximum absolute row sum).
    pub fn sup_norm(&self) -> f64 {
        sup_operator_norm(&self.inner)
    }

    fn check_dim(&self, n: usize) -> Result<(), MatrixError> {
        if n == self.dim() {
            Ok(())
        } else {
            Err(MatrixError::DimensionMismatch {
                expected: self.dim(),
                got: n,
            })
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for NonnegativeMatrix {
    type Error = MatrixError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(rows)
    }
}

impl From<NonnegativeMatrix> for Vec<Vec<f64>> {
    fn from(m: NonnegativeMatrix) -> Self {
        m.to_rows()
    }
}

/// Row-stochastic matrix: nonnegative with unit row sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix(NonnegativeMatrix);

impl StochasticMatrix {
    pub fn new(matrix: NonnegativeMatrix) -> Result<Self, MatrixError> {
        for i in 0..matrix.dim() {
            let sum: f64 = (0..matrix.dim()).map(|j| matrix.get(i, j)).sum();
            if (sum - 1.0).abs() > STOCHASTIC_ROW_TOL {
                return Err(MatrixError::NotStochastic { row: i, sum });
            }
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        Self::new(NonnegativeMatrix::from_rows(rows)?)
    }

    pub fn matrix(&self) -> &NonnegativeMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = MatrixError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::from_rows(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.0.to_rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    EigenDirect,
    PowerIteration,
    GelfandBound,
}

/// Spectral radius together with how it was obtained.
///
/// For power iteration, `residual` is `||u'B - rho u'|| / ||u'||` (sup norms)
/// for the left vector of the block attaining the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralCertificate {
    pub rho: f64,
    pub method: SpectralMethod,
    pub iterations: usize,
    pub residual: f64,
}

impl SpectralCertificate {
    /// `rho < 1`, with radii within [`UNIT_RHO_TOL`] of one counted as one.
    pub fn is_subunit(&self) -> bool {
        self.rho < 1.0 - UNIT_RHO_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Relative width at which the Collatz-Wielandt bracket counts as closed.
    pub bracket_tol: f64,
    pub max_iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            bracket_tol: 1e-13,
            max_iter: 200_000,
        }
    }
}

/// Induced sup norm of an arbitrary real square matrix: the largest
/// absolute row sum.
pub fn sup_operator_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn spectral_radius(b: &NonnegativeMatrix) -> SpectralCertificate {
    spectral_radius_with(b, &SpectralOptions::default())
}

pub fn spectral_radius_with(b: &NonnegativeMatrix, opts: &SpectralOptions) -> SpectralCertificate {
    let blocks = strong_components(b);
    let mut best = SpectralCertificate {
        rho: 0.0,
        method: SpectralMethod::EigenDirect,
        iterations: 0,
        residual: 0.0,
    };
    let mut total_iterations = 0;
    let mut any_iterative = false;
    let mut any_fallback = false;
    for block in &blocks {
        if block.len() == 1 {
            // 1x1 diagonal block: the eigenvalue is the entry itself.
            let rho = b.get(block[0], block[0]);
            if rho > best.rho {
                best.rho = rho;
                best.residual = 0.0;
            }
            continue;
        }
        let res = perron_block(b, block, opts);
        any_iterative = true;
        any_fallback |= !res.closed;
        total_iterations += res.iterations;
        if res.rho > best.rho {
            best.rho = res.rho;
            best.residual = res.residual;
        }
    }
    best.iterations = total_iterations;
    best.method = if any_fallback {
        SpectralMethod::GelfandBound
    } else if any_iterative {
        SpectralMethod::PowerIteration
    } else {
        SpectralMethod::EigenDirect
    };
    best
}

/// True iff the graph with an edge `i -> j` whenever `B_ij > 0` is strongly
/// connected. A 1x1 matrix is irreducible iff its entry is positive.
pub fn is_irreducible(b: &NonnegativeMatrix) -> bool {
    if b.dim() == 1 {
        return b.get(0, 0) > 0.0;
    }
    strong_components(b).len() == 1
}

fn strong_components(b: &NonnegativeMatrix) -> Vec<Vec<usize>> {
    let n = b.dim();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if b.get(i, j) > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    tarjan_scc(&graph)
        .into_iter()
        .map(|comp| {
            let mut idx: Vec<usize> = comp.into_iter().map(|v| v.index()).collect();
            idx.sort_unstable();
            idx
        })
        .collect()
}

struct BlockPerron {
    rho: f64,
    /// Left vector over the block's indices, normalized to sum 1.
    vector: Vec<f64>,
    iterations: usize,
    residual: f64,
    closed: bool,
}

/// Shifted power iteration on the transpose of the principal submatrix given
/// by `idx`, which must be irreducible.
fn perron_block(b: &NonnegativeMatrix, idx: &[usize], opts: &SpectralOptions) -> BlockPerron {
    let m = idx.len();
    let sub = DMatrix::from_fn(m, m, |i, j| b.get(idx[i], idx[j]));
    let norm = sup_operator_norm(&sub);
    if norm == 0.0 {
        return BlockPerron {
            rho: 0.0,
            vector: vec![1.0 / m as f64; m],
            iterations: 0,
            residual: 0.0,
            closed: true,
        };
    }
    // B + sI is primitive for irreducible B and s > 0, so the iteration
    // converges even for periodic blocks.
    let shift = 0.5 * norm;
    let mut u = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut lo = 0.0;
    let mut hi = norm;
    let mut iterations = 0;
    let mut closed = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut ratio_lo = f64::INFINITY;
        let mut ratio_hi = f64::NEG_INFINITY;
        for j in 0..m {
            let mut s = shift * u[j];
            for i in 0..m {
                s += u[i] * sub[(i, j)];
            }
            next[j] = s;
            let r = s / u[j];
            ratio_lo = ratio_lo.min(r);
            ratio_hi = ratio_hi.max(r);
        }
        lo = f64::max(lo, ratio_lo - shift);
        hi = f64::min(hi, ratio_hi - shift);
        let total: f64 = next.iter().sum();
        for (uj, nj) in u.iter_mut().zip(&next) {
            *uj = nj / total;
        }
        if hi - lo <= opts.bracket_tol * hi.max(1.0) {
            closed = true;
            break;
        }
    }
    let rho = if closed {
        0.5 * (lo + hi)
    } else {
        let sub_nn = NonnegativeMatrix { inner: sub.clone() };
        gelfand_estimate(&sub_nn, 4096).value.clamp(lo, hi)
    };
    let residual = left_residual(&sub, &u, rho);
    BlockPerron {
        rho,
        vector: u,
        iterations,
        residual,
        closed,
    }
}

fn left_residual(a: &DMatrix<f64>, u: &[f64], rho: f64) -> f64 {
    let m = u.len();
    let scale = u.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    (0..m)
        .map(|j| {
            let ub: f64 = (0..m).map(|i| u[i] * a[(i, j)]).sum();
            (ub - rho * u[j]).abs()
        })
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector {
    /// Strictly positive, sums to one.
    pub u: Vec<f64>,
    pub rho: f64,
    /// `||u'B - rho u'||` in the sup norm.
    pub residual: f64,
    pub iterations: usize,
}

pub fn left_perron_vector(b: &NonnegativeMatrix) -> Result<PerronVector, MatrixError> {
    left_perron_vector_with(b, &SpectralOptions::default())
}

pub fn left_perron_vector_with(
    b: &NonnegativeMatrix,
    opts: &SpectralOptions,
) -> Result<PerronVector, MatrixError> {
    if !is_irreducible(b) {
        return Err(MatrixError::NotIrreducible);
    }
    if b.dim() == 1 {
        return Ok(PerronVector {
            u: vec![1.0],
            rho: b.get(0, 0),
            residual: 0.0,
            iterations: 0,
        });
    }
    let idx: Vec<usize> = (0..b.dim()).collect();
    let res = perron_block(b, &idx, opts);
    Ok(PerronVector {
        u: res.vector,
        rho: res.rho,
        residual: res.residual,
        iterations: res.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannOptions {
    /// Stop the series once `||B^k||` drops to this value.
    pub residual_tol: f64,
    /// Entrywise agreement between series and direct inverse, relative to
    /// `max(1, |entry|)`.
    pub agreement_tol: f64,
    pub spectral: SpectralOptions,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            agreement_tol: 1e-8,
            spectral: SpectralOptions::default(),
        }
    }
}

/// `(I - B)^{-1}` for `rho(B) < 1`.
///
/// The result is the truncated series `I + B + B^2 + ...`, summed by
/// doubling, and is cross-checked entrywise against an LU inverse.
pub fn neumann_inverse(b: &NonnegativeMatrix) -> Result<DMatrix<f64>, MatrixError> {
    neumann_inverse_with(b, &NeumannOptions::default())
}

pub fn neumann_inverse_with(
    b: &NonnegativeMatrix,
    opts: &NeumannOptions,
) -> Result<DMatrix<f64>, MatrixError> {
    let certificate = spectral_radius_with(b, &opts.spectral);
    if !certificate.is_subunit() {
        return Err(MatrixError::Divergent { certificate });
    }
    let n = b.dim();
    let series = neumann_series(b.as_dmatrix(), opts.residual_tol)?;

    let direct = (DMatrix::<f64>::identity(n, n) - b.as_dmatrix())
        .lu()
        .try_inverse()
        .ok_or(MatrixError::Singular)?;
    let mut worst = (0, 0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let diff = (series[(i, j)] - direct[(i, j)]).abs() / direct[(i, j)].abs().max(1.0);
            if diff > worst.2 {
                worst = (i, j, diff);
            }
        }
    }
    if worst.2 > opts.agreement_tol {
        return Err(MatrixError::Disagreement {
            row: worst.0,
            col: worst.1,
            max_diff: worst.2,
        });
    }
    Ok(series)
}

/// `sum_{k < 2^m} B^k = prod_{j < m} (I + B^{2^j})`, with `m` the first
/// exponent where `||B^{2^m}|| <= tol`.
fn neumann_series(b: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, MatrixError> {
    let n = b.nrows();
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut power = b.clone();
    let mut terms: u64 = 1;
    for _ in 0..63 {
        if sup_operator_norm(&power) <= tol {
            return Ok(sum);
        }
        sum = &sum + &power * &sum;
        power = &power * &power;
        terms *= 2;
    }
    Err(MatrixError::SeriesNotConverged { terms, tol })
}

/// `||B^n||^{1/n}` in the induced sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GelfandEstimate {
    pub n: usize,
    pub value: f64,
    /// `||B^n||` itself is not representable as an `f64`; `value` is still
    /// valid because the power is accumulated in log scale.
    pub overflow: bool,
}

pub fn gelfand_estimate(b: &NonnegativeMatrix, n: usize) -> GelfandEstimate {
    assert!(n >= 1, "Gelfand estimate needs n >= 1");
    let mut power = b.as_dmatrix().clone();
    let mut log_scale = 0.0;
    for _ in 1..n {
        let s = sup_operator_norm(&power);
        if s == 0.0 {
            break;
        }
        power /= s;
        log_scale += s.ln();
        power = &power * b.as_dmatrix();
    }
    let norm = sup_operator_norm(&power);
    if norm == 0.0 {
        return GelfandEstimate {
            n,
            value: 0.0,
            overflow: false,
        };
    }
    let log_norm = norm.ln() + log_scale;
    GelfandEstimate {
        n,
        value: (log_norm / n as f64).exp(),
        overflow: log_norm > f64::MAX.ln(),
    }
}
