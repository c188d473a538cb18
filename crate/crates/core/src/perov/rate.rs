use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ConvergenceReport;

/// Minimum trace length accepted by [`convergence_rate_fit`].
pub const MIN_FIT_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub beta: f64,
    /// Smallest `C` with `trace[n] <= C beta^n` for every recorded `n`.
    pub constant: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateFitError {
    #[error("trace has {0} entries, need at least {MIN_FIT_LEN}")]
    TooShort(usize),
    #[error("rho = {0} is not in [0, 1)")]
    RhoOutOfRange(f64),
    #[error("beta = {beta} is not in (rho, 1) = ({rho}, 1)")]
    BetaOutOfRange { beta: f64, rho: f64 },
    #[error("trace is not contracting at rate {beta}: envelope still rising at step {index}")]
    NonContracting { beta: f64, index: usize },
}

/// Fits the envelope `||d(x^{n+1}, x^n)|| <= C beta^n` with
/// `beta = (rho + 1) / 2`.
pub fn convergence_rate_fit(report: &ConvergenceReport, rho: f64) -> Result<RateFit, RateFitError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(RateFitError::RhoOutOfRange(rho));
    }
    let beta = 0.5 * (rho + 1.0);
    fit_with_beta(&report.sup_norms(), rho, beta)
}

/// As [`convergence_rate_fit`] on a raw sup-norm trace with a caller-chosen
/// `beta` in `(rho, 1)`.
pub fn fit_with_beta(trace: &[f64], rho: f64, beta: f64) -> Result<RateFit, RateFitError> {
    if trace.len() < MIN_FIT_LEN {
        return Err(RateFitError::TooShort(trace.len()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(RateFitError::RhoOutOfRange(rho));
    }
    if !(beta > rho && beta < 1.0) {
        return Err(RateFitError::BetaOutOfRange { beta, rho });
    }
    let constant = envelope_constant(trace, beta)?;
    Ok(RateFit { beta, constant })
}

/// `max_n trace[n] / beta^n`.
///
/// Fails when the maximizing ratio is the last entry of a nonzero trace, or
/// when the trace is not finite: the envelope has not started to bind and no
/// finite constant is supported by the data.
pub fn envelope_constant(trace: &[f64], beta: f64) -> Result<f64, RateFitError> {
    let mut best = 0.0f64;
    let mut best_index = 0;
    let log_beta = beta.ln();
    for (n, &d) in trace.iter().enumerate() {
        if !d.is_finite() {
            return Err(RateFitError::NonContracting { beta, index: n });
        }
        if d == 0.0 {
            continue;
        }
        // d / beta^n in log space so long traces do not overflow.
        let ratio = (d.ln() - n as f64 * log_beta).exp();
        if ratio >= best {
            best = ratio;
            best_index = n;
        }
    }
    let last = trace.len().saturating_sub(1);
    if best > 0.0 && best_index == last && last > 0 {
        return Err(RateFitError::NonContracting { beta, index: last });
    }
    if !best.is_finite() {
        return Err(RateFitError::NonContracting { beta, index: best_index });
    }
    Ok(best)
}
