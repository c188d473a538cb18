//! Optimal savings with Markov-modulated discounting and return risk, solved
//! by time iteration on marginal utility.
//!
//! Wealth evolves as `a' = R(a - c) + Y` with `0 <= c <= a`. The exogenous
//! state moves `i -> j` with probability `p_ij`, an iid shock `zeta_k` with
//! weight `w_k` is drawn, and `(beta, R, Y)` are looked up in per-transition
//! tables. A candidate is a marginal utility function `f_i(a) = u'(c(a, i))`
//! tabulated on an asset grid. The time-iteration operator returns `u'(xi)`
//! where `xi` in `[0, a]` solves
//!
//! ```text
//! u'(xi) = min{ max{ E_i[beta R f_j(R(a - xi) + Y)], u'(a) }, u'(0) }
//! ```
//!
//! It is a generalized contraction in the per-state sup metric with
//! `b_ij = p_ij E[beta R]`.
//!
//! # Interpolation
//!
//! Off-grid values of `f_j` are linear in the coordinate `z = u'(a)`.
//! Between grid points `f` is a convex combination of its neighbours, and
//! outside the grid it is scaled from the nearest end point,
//! `f(a) = f(a_end) u'(a) / u'(a_end)`, which keeps `c/a` flat for CRRA
//! utility. A linear CRRA consumption rule is therefore reproduced exactly.
//!
//! Evaluations on or above the grid are nonnegative combinations of grid
//! values with weights summing to at most one, so monotonicity and
//! discounting hold exactly whenever next-period wealth stays at or above
//! `a_min` (for example when income is bounded below by `a_min`). Below the
//! grid the scale factor exceeds one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridFunction, GridSupMetric};
use crate::ndmatrix::{spectral_radius, MatrixError, NonnegativeMatrix, SpectralCertificate, StochasticMatrix};
use crate::perov::{perov_iterate, ConvergenceReport, Operator, OperatorError, PerovError, PerovOptions};

/// Tolerance on shock weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative slack allowed when checking that a candidate decreases in `a`.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SavingsError {
    #[error("invalid savings model: {0}")]
    Invalid(String),
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("Euler equation root not bracketed at state {state}, a = {a}: {detail}")]
    Bracket { state: usize, a: f64, detail: String },
    #[error("contraction matrix has spectral radius {} >= 1", .certificate.rho)]
    NotContraction { certificate: SpectralCertificate },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Perov(#[from] PerovError),
}

/// Period utility with strictly decreasing positive marginal utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Utility {
    /// `u'(c) = c^{-gamma}`; `gamma = 1` is log utility.
    Crra { gamma: f64 },
    /// `u'(c) = (c + shift)^{-gamma}`, finite at zero.
    ShiftedCrra { gamma: f64, shift: f64 },
}

impl Utility {
    fn validate(&self) -> Result<(), SavingsError> {
        let (gamma, shift) = match *self {
            Utility::Crra { gamma } => (gamma, 1.0),
            Utility::ShiftedCrra { gamma, shift } => (gamma, shift),
        };
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(SavingsError::Invalid(format!("gamma must be positive, got {gamma}")));
        }
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(SavingsError::Invalid(format!("shift must be positive, got {shift}")));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            Utility::Crra { gamma } | Utility::ShiftedCrra { gamma, .. } => gamma,
        }
    }

    fn shift(&self) -> f64 {
        match *self {
            Utility::Crra { .. } => 0.0,
            Utility::ShiftedCrra { shift, .. } => shift,
        }
    }

    pub fn marginal(&self, c: f64) -> f64 {
        let x = c + self.shift();
        let gamma = self.gamma();
        if gamma == 1.0 {
            1.0 / x
        } else {
            x.powf(-gamma)
        }
    }

    /// Inverse of [`Self::marginal`], returning zero for `f >= u'(0)`.
    pub fn inverse_marginal(&self, f: f64) -> f64 {
        let gamma = self.gamma();
        let x = if gamma == 1.0 { 1.0 / f } else { f.powf(-1.0 / gamma) };
        (x - self.shift()).max(0.0)
    }

    /// `u'(0)`, or `None` when it is infinite.
    pub fn marginal_at_zero(&self) -> Option<f64> {
        match self {
            Utility::Crra { .. } => None,
            Utility::ShiftedCrra { .. } => Some(self.marginal(0.0)),
        }
    }

    /// Utility level, normalized so that shifted utility vanishes at zero.
    pub fn level(&self, c: f64) -> f64 {
        let gamma = self.gamma();
        match *self {
            Utility::Crra { .. } if gamma == 1.0 => c.ln(),
            Utility::Crra { .. } => c.powf(1.0 - gamma) / (1.0 - gamma),
            Utility::ShiftedCrra { shift, .. } if gamma == 1.0 => ((c + shift) / shift).ln(),
            Utility::ShiftedCrra { shift, .. } => {
                ((c + shift).powf(1.0 - gamma) - shift.powf(1.0 - gamma)) / (1.0 - gamma)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockDistribution {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ShockDistribution {
    pub fn degenerate() -> Self {
        Self {
            support: vec![0.0],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn validate(&self) -> Result<(), SavingsError> {
        if self.weights.is_empty() || self.support.len() != self.weights.len() {
            return Err(SavingsError::Invalid(
                "shock support and weights must be nonempty and of equal length".into(),
            ));
        }
        if self.support.iter().any(|z| !z.is_finite()) {
            return Err(SavingsError::Invalid("shock support must be finite".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(SavingsError::Invalid("shock weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SavingsError::Invalid(format!("shock weights sum to {total}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn geometric(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            spacing: Spacing::Geometric,
        }
    }

    pub fn build(&self) -> Result<Vec<f64>, SavingsError> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(SavingsError::Invalid(format!(
                "asset grid needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.points < 2 {
            return Err(SavingsError::Invalid("asset grid needs at least two points".into()));
        }
        let n = self.points - 1;
        let mut grid: Vec<f64> = (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                match self.spacing {
                    Spacing::Geometric => self.min * (self.max / self.min).powf(t),
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                }
            })
            .collect();
        grid[0] = self.min;
        grid[n] = self.max;
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SavingsError::Invalid("asset grid is not strictly increasing".into()));
        }
        Ok(grid)
    }
}

/// Serialized form; tables are indexed `[i][j][k]` by current state, next
/// state and shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavingsModelSpec {
    #[serde(rename = "P")]
    pub p: StochasticMatrix,
    pub shocks: ShockDistribution,
    pub beta_table: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R_table")]
    pub r_table: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Y_table")]
    pub y_table: Vec<Vec<Vec<f64>>>,
    pub utility: Utility,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SavingsModelSpec", into = "SavingsModelSpec")]
pub struct SavingsModel {
    spec: SavingsModelSpec,
    beta: Vec<f64>,
    r: Vec<f64>,
    y: Vec<f64>,
    grid: Vec<f64>,
    /// `u'` at the grid points, the interpolation coordinate.
    z: Vec<f64>,
}

fn flatten_table(name: &str, table: &[Vec<Vec<f64>>], n: usize, k: usize) -> Result<Vec<f64>, SavingsError> {
    let shape_err = || SavingsError::Invalid(format!("{name} must have shape {n}x{n}x{k}"));
    if table.len() != n {
        return Err(shape_err());
    }
    let mut out = Vec::with_capacity(n * n * k);
    for row in table {
        if row.len() != n {
            return Err(shape_err());
        }
        for cell in row {
            if cell.len() != k {
                return Err(shape_err());
            }
            for &x in cell {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(SavingsError::Invalid(format!("{name} entries must be finite and nonnegative")));
                }
                out.push(x);
            }
        }
    }
    Ok(out)
}

impl SavingsModel {
    pub fn new(spec: SavingsModelSpec) -> Result<Self, SavingsError> {
        spec.shocks.validate()?;
        spec.utility.validate()?;
        let n = spec.p.dim();
        let k = spec.shocks.len();
        let beta = flatten_table("beta_table", &spec.beta_table, n, k)?;
        let r = flatten_table("R_table", &spec.r_table, n, k)?;
        let y = flatten_table("Y_table", &spec.y_table, n, k)?;
        let grid = spec.grid.build()?;
        let z: Vec<f64> = grid.iter().map(|&a| spec.utility.marginal(a)).collect();
        if z.windows(2).any(|w| !(w[1] < w[0])) || z.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SavingsError::Invalid(
                "marginal utility is not finite and strictly decreasing on the grid".into(),
            ));
        }
        Ok(Self { spec, beta, r, y, grid, z })
    }

    /// Single-state model with deterministic `beta`, `R`, `Y`.
    pub fn deterministic(beta: f64, r: f64, y: f64, utility: Utility, grid: GridSpec) -> Result<Self, SavingsError> {
        Self::new(SavingsModelSpec {
            p: StochasticMatrix::from_rows(vec![vec![1.0]])?,
            shocks: ShockDistribution::degenerate(),
            beta_table: vec![vec![vec![beta]]],
            r_table: vec![vec![vec![r]]],
            y_table: vec![vec![vec![y]]],
            utility,
            grid,
        })
    }

    pub fn spec(&self) -> &SavingsModelSpec {
        &self.spec
    }

    pub fn states(&self) -> usize {
        self.spec.p.dim()
    }

    pub fn shocks(&self) -> &ShockDistribution {
        &self.spec.shocks
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.spec.p
    }

    pub fn utility(&self) -> &Utility {
        &self.spec.utility
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.states() + j) * self.spec.shocks.len() + k
    }

    pub fn beta(&self, i: usize, j: usize, k: usize) -> f64 {
        self.beta[self.idx(i, j, k)]
    }

    pub fn gross_return(&self, i: usize, j: usize, k: usize) -> f64 {
        self.r[self.idx(i, j, k)]
    }

    pub fn income(&self, i: usize, j: usize, k: usize) -> f64 {
        self.y[self.idx(i, j, k)]
    }

    /// Copy of the model with every discount factor multiplied by `s >= 0`.
    pub fn with_beta_scaled(&self, s: f64) -> Result<Self, SavingsError> {
        let mut spec = self.spec.clone();
        for x in spec.beta_table.iter_mut().flatten().flatten() {
            *x *= s;
        }
        Self::new(spec)
    }

    /// Evaluates a tabulated marginal utility row at an arbitrary `a >= 0`.
    pub fn interpolate(&self, row: &[f64], a: f64) -> f64 {
        let m = self.grid.len();
        debug_assert_eq!(row.len(), m);
        if a <= self.grid[0] {
            return row[0] * (self.spec.utility.marginal(a) / self.z[0]);
        }
        if a >= self.grid[m - 1] {
            return row[m - 1] * (self.spec.utility.marginal(a) / self.z[m - 1]);
        }
        let k = self.grid.partition_point(|&g| g <= a) - 1;
        let za = self.spec.utility.marginal(a);
        let t = ((self.z[k] - za) / (self.z[k] - self.z[k + 1])).clamp(0.0, 1.0);
        (1.0 - t) * row[k] + t * row[k + 1]
    }

    /// Consumption at an arbitrary `(i, a)` implied by a tabulated marginal
    /// utility, clipped to the budget `[0, a]`.
    pub fn consumption_at(&self, f: &GridFunction, i: usize, a: f64) -> f64 {
        self.spec
            .utility
            .inverse_marginal(self.interpolate(f.row(i), a))
            .clamp(0.0, a.max(0.0))
    }

    /// `E_i[beta R f_j(R s + Y)]` for savings `s >= 0`.
    fn expectation(&self, i: usize, f: &GridFunction, s: f64) -> f64 {
        let n = self.states();
        let kk = self.spec.shocks.len();
        let mut total = 0.0;
        for j in 0..n {
            let p = self.spec.p.get(i, j);
            if p == 0.0 {
                continue;
            }
            for k in 0..kk {
                let idx = self.idx(i, j, k);
                let coef = p * self.spec.shocks.weights[k] * self.beta[idx] * self.r[idx];
                if coef == 0.0 {
                    continue;
                }
                total += coef * self.interpolate(f.row(j), self.r[idx] * s + self.y[idx]);
            }
        }
        total
    }

    fn clip(&self, e: f64, a: f64) -> f64 {
        let lower = e.max(self.spec.utility.marginal(a));
        match self.spec.utility.marginal_at_zero() {
            Some(top) => lower.min(top),
            None => lower,
        }
    }
}

impl TryFrom<SavingsModelSpec> for SavingsModel {
    type Error = SavingsError;

    fn try_from(spec: SavingsModelSpec) -> Result<Self, Self::Error> {
        Self::new(spec)
    }
}

impl From<SavingsModel> for SavingsModelSpec {
    fn from(model: SavingsModel) -> Self {
        model.spec
    }
}

/// `b_ij = p_ij sum_k w_k beta(i, j, k) R(i, j, k)`.
pub fn contraction_matrix(model: &SavingsModel) -> NonnegativeMatrix {
    let w = &model.spec.shocks.weights;
    NonnegativeMatrix::from_fn(model.states(), |i, j| {
        let e: f64 = (0..w.len())
            .map(|k| w[k] * model.beta(i, j, k) * model.gross_return(i, j, k))
            .sum();
        model.spec.p.get(i, j) * e
    })
    .expect("tables validated finite and nonnegative")
}

fn check_shape(model: &SavingsModel, f: &GridFunction) -> Result<(), SavingsError> {
    if f.states() != model.states() || f.points() != model.grid.len() {
        return Err(SavingsError::InvalidCandidate(format!(
            "expected {}x{} values, got {}x{}",
            model.states(),
            model.grid.len(),
            f.states(),
            f.points()
        )));
    }
    Ok(())
}

/// Checks that `f` is positive, finite and decreasing in `a` for every
/// state, up to [`MONOTONE_SLACK`].
pub fn validate_marginal(model: &SavingsModel, f: &GridFunction) -> Result<(), SavingsError> {
    check_shape(model, f)?;
    for i in 0..f.states() {
        let row = f.row(i);
        if let Some(k) = row.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(SavingsError::InvalidCandidate(format!(
                "f[{i}][{k}] = {} is not positive and finite",
                row[k]
            )));
        }
        if let Some(k) = row.windows(2).position(|w| w[1] > w[0] * (1.0 + MONOTONE_SLACK)) {
            return Err(SavingsError::InvalidCandidate(format!(
                "f[{i}] increases between grid points {k} and {}",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Solves the Euler equation at one `(i, a)`, returning the optimal
/// consumption `xi`.
fn solve_point(model: &SavingsModel, f: &GridFunction, i: usize, a: f64) -> Result<f64, SavingsError> {
    let u = &model.spec.utility;
    let at_a = model.expectation(i, f, 0.0);
    if at_a.is_nan() {
        return Err(SavingsError::Bracket {
            state: i,
            a,
            detail: "expectation is NaN when consuming all wealth".into(),
        });
    }
    if at_a <= u.marginal(a) {
        return Ok(a);
    }
    // h(xi) = u'(xi) - clip(E(a - xi)) is decreasing, positive near zero and
    // negative at a. Only interior midpoints are evaluated.
    let (mut lo, mut hi) = (0.0_f64, a);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h = u.marginal(mid) - model.clip(model.expectation(i, f, a - mid), a);
        if h.is_nan() {
            return Err(SavingsError::Bracket {
                state: i,
                a,
                detail: format!("Euler gap is NaN at xi = {mid}, bracket [{lo}, {hi}]"),
            });
        }
        if h >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One step of time iteration.
pub fn euler_update(model: &SavingsModel, f: &GridFunction) -> Result<GridFunction, SavingsError> {
    validate_marginal(model, f)?;
    let m = model.grid.len();
    let values = (0..model.states() * m)
        .into_par_iter()
        .map(|idx| {
            let (i, k) = (idx / m, idx % m);
            solve_point(model, f, i, model.grid[k]).map(|xi| model.spec.utility.marginal(xi))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridFunction::from_values(model.states(), m, values))
}

/// The time-iteration operator with its coefficient matrix.
#[derive(Debug, Clone)]
pub struct TimeIteration<'a> {
    model: &'a SavingsModel,
    b: NonnegativeMatrix,
}

impl<'a> TimeIteration<'a> {
    pub fn new(model: &'a SavingsModel) -> Self {
        Self {
            model,
            b: contraction_matrix(model),
        }
    }

    pub fn coefficient_matrix(&self) -> &NonnegativeMatrix {
        &self.b
    }
}

impl Operator<GridFunction> for TimeIteration<'_> {
    fn apply(&self, f: &GridFunction) -> Result<GridFunction, OperatorError> {
        euler_update(self.model, f).map_err(|e| OperatorError(e.to_string()))
    }
}

/// `f = u'(c)`. Zero consumption is rejected when `u'(0)` is infinite.
pub fn consumption_to_marginal(model: &SavingsModel, c: &GridFunction) -> Result<GridFunction, SavingsError> {
    check_shape(model, c)?;
    let u = &model.spec.utility;
    let infinite_at_zero = u.marginal_at_zero().is_none();
    for (idx, &v) in c.values().iter().enumerate() {
        let a = model.grid[idx % model.grid.len()];
        if !(v >= 0.0 && v <= a) || (infinite_at_zero && v == 0.0) {
            return Err(SavingsError::InvalidCandidate(format!(
                "consumption {v} outside the admissible range at a = {a}"
            )));
        }
    }
    Ok(c.map(|v| u.marginal(v)))
}

/// `c = min{(u')^{-1}(f), a}`; the cap only absorbs rounding when `f >= u'(a)`.
pub fn marginal_to_consumption(model: &SavingsModel, f: &GridFunction) -> Result<GridFunction, SavingsError> {
    check_shape(model, f)?;
    if let Some(v) = f.values().iter().find(|v| !(**v > 0.0)) {
        return Err(SavingsError::InvalidCandidate(format!("marginal utility {v} is not positive")));
    }
    let u = model.spec.utility;
    Ok(GridFunction::from_fn(f.states(), f.points(), |i, k| {
        u.inverse_marginal(f.get(i, k)).min(model.grid[k])
    }))
}

/// `|u'(c) - min{max{E[beta R u'(c')], u'(a)}, u'(0)}|` at every grid point.
pub fn euler_residuals(model: &SavingsModel, f: &GridFunction) -> Result<GridFunction, SavingsError> {
    check_shape(model, f)?;
    let u = &model.spec.utility;
    let m = model.grid.len();
    Ok(GridFunction::from_fn(model.states(), m, |i, k| {
        let a = model.grid[k];
        let c = u.inverse_marginal(f.get(i, k)).min(a);
        (u.marginal(c) - model.clip(model.expectation(i, f, a - c), a)).abs()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsSolution {
    pub consumption: GridFunction,
    pub marginal: GridFunction,
    pub report: ConvergenceReport,
    pub spectral: SpectralCertificate,
}

/// Time iteration from `c(a, i) = a`.
pub fn solve_savings(model: &SavingsModel, opts: &PerovOptions) -> Result<SavingsSolution, SavingsError> {
    let c0 = GridFunction::from_fn(model.states(), model.grid.len(), |_, k| model.grid[k]);
    solve_savings_from(model, &c0, opts)
}

pub fn solve_savings_from(
    model: &SavingsModel,
    c0: &GridFunction,
    opts: &PerovOptions,
) -> Result<SavingsSolution, SavingsError> {
    let op = TimeIteration::new(model);
    let spectral = spectral_radius(&op.b);
    if !spectral.is_subunit() {
        return Err(SavingsError::NotContraction { certificate: spectral });
    }
    let f0 = consumption_to_marginal(model, c0)?;
    let metric = GridSupMetric {
        states: model.states(),
    };
    let (marginal, report) = perov_iterate(&op, f0, &metric, &op.b, opts)?;
    let consumption = marginal_to_consumption(model, &marginal)?;
    Ok(SavingsSolution {
        consumption,
        marginal,
        report,
        spectral,
    })
}
