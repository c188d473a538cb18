//! Vector-valued metrics and generalized (Perov) contractions.
//!
//! A vector-valued metric `d: X x X -> R_+^I` replaces the scalar distance of
//! Banach's theorem, and the contraction modulus becomes a nonnegative matrix
//! `B` with `d(Tx, Ty) <= B d(x, y)` entrywise. Whenever `rho(B) < 1` the
//! iteration `x^{n+1} = T x^n` converges to the unique fixed point at rate
//! `O(beta^n)` for every `beta` in `(rho(B), 1)`.

mod iterate;
mod rate;
mod verify;

use thiserror::Error;

pub use iterate::{
    perov_iterate, perov_iterate_observed, ConvergenceReport, PerovError, PerovOptions,
    Termination,
};
pub use rate::{
    convergence_rate_fit, envelope_constant, fit_with_beta, RateFit, RateFitError, MIN_FIT_LEN,
};
pub use verify::{
    blackwell_check, metric_axiom_check, verify_contraction_empirical, Axiom, AxiomReport,
    AxiomViolation, BlackwellReport, CheckLocation, CheckSummary, ContractionReport, ContractionViolation,
    verify_grid_contraction, VerifyError, CONTRACTION_SLACK, METRIC_AXIOM_TOL,
};

/// A value of a vector-valued metric, one component per exogenous state.
///
/// Construction does not enforce nonnegativity so that faulty metrics can be
/// diagnosed by [`metric_axiom_check`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct VectorDistance(Vec<f64>);

impl VectorDistance {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `max_i |d_i|`.
    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Entrywise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

/// A distance with values in `R^I`.
pub trait VectorMetric<X: ?Sized> {
    fn dim(&self) -> usize;
    fn distance(&self, x: &X, y: &X) -> VectorDistance;
}

/// Componentwise absolute difference on `R^I`.
#[derive(Debug, Clone, Copy)]
pub struct AbsDiffMetric {
    pub dim: usize,
}

impl VectorMetric<Vec<f64>> for AbsDiffMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, x: &Vec<f64>, y: &Vec<f64>) -> VectorDistance {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        VectorDistance(x.iter().zip(y).map(|(a, b)| (a - b).abs()).collect())
    }
}

/// Metric given by a closure.
pub struct FnMetric<F> {
    pub dim: usize,
    pub f: F,
}

impl<X, F> VectorMetric<X> for FnMetric<F>
where
    F: Fn(&X, &X) -> VectorDistance,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn distance(&self, x: &X, y: &X) -> VectorDistance {
        (self.f)(x, y)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("operator failed: {0}")]
pub struct OperatorError(pub String);

/// A self map `T: X -> X`. Closures `Fn(&X) -> X` implement it directly.
pub trait Operator<X> {
    fn apply(&self, x: &X) -> Result<X, OperatorError>;
}

impl<X, F> Operator<X> for F
where
    F: Fn(&X) -> X,
{
    fn apply(&self, x: &X) -> Result<X, OperatorError> {
        Ok(self(x))
    }
}
