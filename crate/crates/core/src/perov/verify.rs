//! Sample-based checks of the metric axioms, the generalized contraction
//! inequality, and the monotonicity/discounting sufficient conditions.
//!
//! All comparisons allow a slack of `tol * max(1, |rhs|)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Operator, OperatorError, VectorMetric};
use crate::grid::{GridFunction, GridSupMetric};
use crate::ndmatrix::NonnegativeMatrix;

pub const METRIC_AXIOM_TOL: f64 = 1e-12;
pub const CONTRACTION_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("need at least {needed} sample points, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[inline]
fn slack(tol: f64, rhs: f64) -> f64 {
    tol * rhs.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Nonnegativity,
    Identity,
    Symmetry,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    /// Indices into the sample.
    pub points: Vec<usize>,
    pub component: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, axiom: Axiom) -> bool {
        self.violations.iter().any(|v| v.axiom == axiom)
    }
}

/// Checks nonnegativity, identity of indiscernibles, symmetry and the
/// entrywise triangle inequality over all pairs and triples of `sample`.
pub fn metric_axiom_check<X, M>(metric: &M, sample: &[X], tol: f64) -> Result<AxiomReport, VerifyError>
where
    X: PartialEq,
    M: VectorMetric<X> + ?Sized,
{
    if sample.len() < 3 {
        return Err(VerifyError::SampleTooSmall {
            needed: 3,
            got: sample.len(),
        });
    }
    let n = sample.len();
    let dist: Vec<Vec<Vec<f64>>> = sample
        .iter()
        .map(|x| {
            sample
                .iter()
                .map(|y| metric.distance(x, y).components().to_vec())
                .collect()
        })
        .collect();
    let dim = metric.dim();
    let mut report = AxiomReport::default();
    for i in 0..n {
        for j in 0..n {
            let d = &dist[i][j];
            if d.len() != dim {
                return Err(VerifyError::DimensionMismatch {
                    expected: dim,
                    got: d.len(),
                });
            }
            for (c, &v) in d.iter().enumerate() {
                if v < -tol {
                    report.violations.push(AxiomViolation {
                        axiom: Axiom::Nonnegativity,
                        points: vec![i, j],
                        component: c,
                        excess: -v,
                    });
                }
                let sym = (v - dist[j][i][c]).abs();
                if i < j && sym > slack(tol, v) {
                    report.violations.push(AxiomViolation {
                        axiom: Axiom::Symmetry,
                        points: vec![i, j],
                        component: c,
                        excess: sym,
                    });
                }
            }
            let same = sample[i] == sample[j];
            let largest = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if same && largest > tol {
                let component = d.iter().position(|v| v.abs() == largest).unwrap_or(0);
                report.violations.push(AxiomViolation {
                    axiom: Axiom::Identity,
                    points: vec![i, j],
                    component,
                    excess: largest,
                });
            } else if !same && largest == 0.0 {
                report.violations.push(AxiomViolation {
                    axiom: Axiom::Identity,
                    points: vec![i, j],
                    component: 0,
                    excess: 0.0,
                });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for c in 0..dim {
                    let rhs = dist[i][j][c] + dist[j][k][c];
                    let excess = dist[i][k][c] - rhs;
                    if excess > slack(tol, rhs) {
                        report.violations.push(AxiomViolation {
                            axiom: Axiom::Triangle,
                            points: vec![i, j, k],
                            component: c,
                            excess,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionViolation {
    pub pair: usize,
    pub component: usize,
    /// `d_i(Tx, Ty)`.
    pub lhs: f64,
    /// `(B d(x, y))_i`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Component with the largest `lhs - rhs` over all pairs, violating or not.
    pub tightest: Option<ContractionViolation>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `d(Tx, Ty) <= B d(x, y)` entrywise on each pair.
pub fn verify_contraction_empirical<X, T, M>(
    op: &T,
    metric: &M,
    b: &NonnegativeMatrix,
    pairs: &[(X, X)],
) -> Result<ContractionReport, VerifyError>
where
    T: Operator<X> + ?Sized,
    M: VectorMetric<X> + ?Sized,
{
    if pairs.is_empty() {
        return Err(VerifyError::SampleTooSmall { needed: 1, got: 0 });
    }
    if metric.dim() != b.dim() {
        return Err(VerifyError::DimensionMismatch {
            expected: b.dim(),
            got: metric.dim(),
        });
    }
    let mut violations = 0;
    let mut tightest: Option<ContractionViolation> = None;
    for (p, (x, y)) in pairs.iter().enumerate() {
        let before = metric.distance(x, y);
        let after = metric.distance(&op.apply(x)?, &op.apply(y)?);
        let bound = b.mul_vec(before.components());
        for (c, (&lhs, &rhs)) in after.components().iter().zip(&bound).enumerate() {
            let excess = lhs - rhs;
            if excess > slack(CONTRACTION_SLACK, rhs) {
                violations += 1;
            }
            if tightest.as_ref().is_none_or(|t| excess > t.lhs - t.rhs) {
                tightest = Some(ContractionViolation {
                    pair: p,
                    component: c,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(ContractionReport {
        pairs_checked: pairs.len(),
        violations,
        tightest,
    })
}

/// Location of the worst entry in a Blackwell check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckLocation {
    pub sample: usize,
    pub state: usize,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub checked: usize,
    pub violations: usize,
    pub worst_excess: f64,
    pub worst: Option<CheckLocation>,
    /// Samples skipped because their premise (`f <= g`, `c >= 0`) failed.
    pub invalid_premises: usize,
}

impl CheckSummary {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
            worst: None,
            invalid_premises: 0,
        }
    }

    /// Records `lhs <= rhs` entrywise.
    fn record(&mut self, sample: usize, lhs: &GridFunction, rhs: &GridFunction) {
        self.checked += 1;
        let mut violated = false;
        for i in 0..lhs.states() {
            for k in 0..lhs.points() {
                let r = rhs.get(i, k);
                let excess = lhs.get(i, k) - r;
                if excess > slack(CONTRACTION_SLACK, r) {
                    violated = true;
                }
                if excess > self.worst_excess {
                    self.worst_excess = excess;
                    self.worst = Some(CheckLocation {
                        sample,
                        state: i,
                        point: k,
                    });
                }
            }
        }
        if violated {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackwellReport {
    pub monotonicity: CheckSummary,
    pub discounting: CheckSummary,
}

impl BlackwellReport {
    pub fn passed(&self) -> bool {
        self.monotonicity.passed() && self.discounting.passed()
    }
}

/// Monotonicity (`f <= g => Tf <= Tg`) on `ordered_pairs` and discounting
/// (`T(f + c) <= Tf + Bc`) on every `(f, c)` from `functions x constants`.
pub fn blackwell_check<T>(
    op: &T,
    b: &NonnegativeMatrix,
    ordered_pairs: &[(GridFunction, GridFunction)],
    functions: &[GridFunction],
    constants: &[Vec<f64>],
) -> Result<BlackwellReport, VerifyError>
where
    T: Operator<GridFunction> + ?Sized,
{
    let mut monotonicity = CheckSummary::new();
    for (s, (f, g)) in ordered_pairs.iter().enumerate() {
        if !f.le(g) {
            monotonicity.invalid_premises += 1;
            continue;
        }
        monotonicity.record(s, &op.apply(f)?, &op.apply(g)?);
    }

    let mut discounting = CheckSummary::new();
    let mut sample = 0;
    for f in functions {
        if f.states() != b.dim() {
            return Err(VerifyError::DimensionMismatch {
                expected: b.dim(),
                got: f.states(),
            });
        }
        let tf = op.apply(f)?;
        for c in constants {
            if c.len() != b.dim() {
                return Err(VerifyError::DimensionMismatch {
                    expected: b.dim(),
                    got: c.len(),
                });
            }
            if c.iter().any(|&x| !(x >= 0.0)) {
                discounting.invalid_premises += 1;
                continue;
            }
            let lhs = op.apply(&f.add_per_state(c))?;
            let rhs = tf.add_per_state(&b.mul_vec(c));
            discounting.record(sample, &lhs, &rhs);
            sample += 1;
        }
    }
    Ok(BlackwellReport {
        monotonicity,
        discounting,
    })
}

/// Contraction check on grid functions with the per-state sup metric.
pub fn verify_grid_contraction<T>(
    op: &T,
    b: &NonnegativeMatrix,
    pairs: &[(GridFunction, GridFunction)],
) -> Result<ContractionReport, VerifyError>
where
    T: Operator<GridFunction> + ?Sized,
{
    verify_contraction_empirical(op, &GridSupMetric { states: b.dim() }, b, pairs)
}
