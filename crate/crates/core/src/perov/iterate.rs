use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rate::convergence_rate_fit;
use super::{Operator, OperatorError, VectorDistance, VectorMetric};
use crate::ndmatrix::{
    neumann_inverse, spectral_radius, sup_operator_norm, MatrixError, NonnegativeMatrix,
    SpectralCertificate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerovError {
    #[error("coefficient matrix has spectral radius {} >= 1", .certificate.rho)]
    NotContraction { certificate: SpectralCertificate },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("metric dimension {metric} does not match coefficient matrix dimension {matrix}")]
    DimensionMismatch { metric: usize, matrix: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ToleranceMet,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerovOptions {
    /// Target for the a posteriori bound `||d(x^n, x^{n-1})|| * ||(I-B)^{-1}||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PerovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

impl PerovOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter }
    }
}

/// Trace and certificate of a Perov iteration.
///
/// `distances[n]` is `d(x^{n+1}, x^n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub distances: Vec<VectorDistance>,
    pub terminated: Termination,
    pub rho: f64,
    /// `||(I - B)^{-1}||` in the induced sup norm.
    pub inverse_norm: f64,
    /// Certified sup-norm bound on `d(x^N, x^*)` at the returned iterate.
    pub error_bound: f64,
    pub fitted_rate: Option<f64>,
    pub fitted_constant: Option<f64>,
}

impl ConvergenceReport {
    pub fn sup_norms(&self) -> Vec<f64> {
        self.distances.iter().map(VectorDistance::sup_norm).collect()
    }

    pub fn converged(&self) -> bool {
        self.terminated == Termination::ToleranceMet
    }
}

/// Iterates `x^{n+1} = T x^n` from `x0` until the certified bound
/// `||d(x^n, x^{n-1})|| * ||(I-B)^{-1}||` falls to `opts.tol`.
///
/// The bound comes from `d(x^{n+k}, x^{n+k-1}) <= B^k d(x^n, x^{n-1})`,
/// summed over `k`.
pub fn perov_iterate<X, T, M>(
    op: &T,
    x0: X,
    metric: &M,
    b: &NonnegativeMatrix,
    opts: &PerovOptions,
) -> Result<(X, ConvergenceReport), PerovError>
where
    T: Operator<X> + ?Sized,
    M: VectorMetric<X> + ?Sized,
{
    perov_iterate_observed(op, x0, metric, b, opts, |_, _| {})
}

/// As [`perov_iterate`], calling `observe(n, &x^n)` for every iterate
/// including `x^0`.
pub fn perov_iterate_observed<X, T, M>(
    op: &T,
    x0: X,
    metric: &M,
    b: &NonnegativeMatrix,
    opts: &PerovOptions,
    mut observe: impl FnMut(usize, &X),
) -> Result<(X, ConvergenceReport), PerovError>
where
    T: Operator<X> + ?Sized,
    M: VectorMetric<X> + ?Sized,
{
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(PerovError::InvalidTolerance(opts.tol));
    }
    if metric.dim() != b.dim() {
        return Err(PerovError::DimensionMismatch {
            metric: metric.dim(),
            matrix: b.dim(),
        });
    }
    let certificate = spectral_radius(b);
    if !certificate.is_subunit() {
        return Err(PerovError::NotContraction { certificate });
    }
    let inverse_norm = sup_operator_norm(&neumann_inverse(b)?);

    let mut x = x0;
    observe(0, &x);
    let mut distances = Vec::new();
    let mut terminated = Termination::MaxIterations;
    let mut error_bound = f64::INFINITY;
    for n in 1..=opts.max_iter {
        let next = op.apply(&x)?;
        let d = metric.distance(&next, &x);
        let step = d.sup_norm();
        distances.push(d);
        x = next;
        observe(n, &x);
        if !step.is_finite() {
            terminated = Termination::Diverged;
            break;
        }
        error_bound = step * inverse_norm;
        if error_bound <= opts.tol {
            terminated = Termination::ToleranceMet;
            break;
        }
    }

    let mut report = ConvergenceReport {
        iterations: distances.len(),
        distances,
        terminated,
        rho: certificate.rho,
        inverse_norm,
        error_bound,
        fitted_rate: None,
        fitted_constant: None,
    };
    if let Ok(fit) = convergence_rate_fit(&report, certificate.rho) {
        report.fitted_rate = Some(fit.beta);
        report.fitted_constant = Some(fit.constant);
    }
    Ok((x, report))
}
