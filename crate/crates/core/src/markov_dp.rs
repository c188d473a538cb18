//! Finite dynamic programs with Markov-modulated, transition-dependent
//! discount factors.
//!
//! The exogenous state follows a Markov chain with transition matrix `P`; a
//! transition `i -> j` discounts next period's payoff by `beta_ij >= 0`, which
//! may exceed one. The Bellman operator
//!
//! ```text
//! (TV)_i(x) = max_{y in Gamma_i(x)} { u_i(x, y) + sum_j p_ij beta_ij V_j(g_ij(x, y)) }
//! ```
//!
//! is a generalized contraction with coefficient matrix `B = (p_ij beta_ij)`
//! whenever `rho(B) < 1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridFunction, GridSupMetric};
use crate::ndmatrix::{spectral_radius, MatrixError, NonnegativeMatrix, SpectralCertificate, StochasticMatrix};
use crate::perov::{perov_iterate, ConvergenceReport, Operator, OperatorError, PerovError, PerovOptions};

/// Largest induced linear system solved densely by [`policy_value`].
const DENSE_POLICY_LIMIT: usize = 1500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DPError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("empty feasible set at state {state}, grid point {point}")]
    EmptyFeasibleSet { state: usize, point: usize },
    #[error("discount matrix has spectral radius {} >= 1", .certificate.rho)]
    NotContraction { certificate: SpectralCertificate },
    #[error("policy chooses infeasible control {control} at state {state}, grid point {point}")]
    InfeasiblePolicy {
        state: usize,
        point: usize,
        control: usize,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Perov(#[from] PerovError),
}

/// Approximation applied when the law of motion was projected onto `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub kind: String,
    /// Largest distance between an exact next state and its grid point.
    pub max_error: f64,
}

/// Serialized form of a [`DPModel`]: dense tables indexed
/// `utility[i][x][y]`, `motion[i][j][x][y]` (grid index into `x_grid`) and
/// `feasible[i][x]` (indices into `y_grid`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DPModelSpec {
    #[serde(rename = "P")]
    pub p: StochasticMatrix,
    pub beta: NonnegativeMatrix,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub feasible: Vec<Vec<Vec<usize>>>,
    pub utility: Vec<Vec<Vec<f64>>>,
    pub motion: Vec<Vec<Vec<Vec<usize>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
}

/// Validated finite dynamic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DPModelSpec", into = "DPModelSpec")]
pub struct DPModel {
    p: StochasticMatrix,
    beta: NonnegativeMatrix,
    x_grid: Vec<f64>,
    y_grid: Vec<f64>,
    /// `(i, x) -> sorted feasible control indices`.
    feasible: Vec<Vec<usize>>,
    /// Dense `[i][x][y]`.
    utility: Vec<f64>,
    /// Dense `[i][j][x][y]`.
    motion: Vec<usize>,
    projection: Option<Projection>,
}

impl DPModel {
    pub fn new(spec: DPModelSpec) -> Result<Self, DPError> {
        let n = spec.p.dim();
        let nx = spec.x_grid.len();
        let ny = spec.y_grid.len();
        let invalid = |msg: String| Err(DPError::Invalid(msg));
        if spec.beta.dim() != n {
            return invalid(format!("beta is {0}x{0}, P is {1}x{1}", spec.beta.dim(), n));
        }
        if nx == 0 || ny == 0 {
            return invalid("state and control grids must be nonempty".into());
        }
        if spec.x_grid.iter().chain(&spec.y_grid).any(|v| !v.is_finite()) {
            return invalid("grid values must be finite".into());
        }
        if spec.feasible.len() != n || spec.feasible.iter().any(|r| r.len() != nx) {
            return invalid(format!("feasible must be {n} x {nx}"));
        }
        if spec.utility.len() != n
            || spec
                .utility
                .iter()
                .any(|r| r.len() != nx || r.iter().any(|c| c.len() != ny))
        {
            return invalid(format!("utility must be {n} x {nx} x {ny}"));
        }
        if spec.motion.len() != n
            || spec.motion.iter().any(|r| {
                r.len() != n || r.iter().any(|s| s.len() != nx || s.iter().any(|c| c.len() != ny))
            })
        {
            return invalid(format!("motion must be {n} x {n} x {nx} x {ny}"));
        }

        let mut feasible = Vec::with_capacity(n * nx);
        for i in 0..n {
            for x in 0..nx {
                let mut ys = spec.feasible[i][x].clone();
                ys.sort_unstable();
                ys.dedup();
                if ys.is_empty() {
                    return Err(DPError::EmptyFeasibleSet { state: i, point: x });
                }
                if let Some(&bad) = ys.iter().find(|&&y| y >= ny) {
                    return invalid(format!("feasible control index {bad} out of range"));
                }
                for &y in &ys {
                    if !spec.utility[i][x][y].is_finite() {
                        return invalid(format!("utility at ({i}, {x}, {y}) is not finite"));
                    }
                }
                feasible.push(ys);
            }
        }
        let utility: Vec<f64> = spec.utility.iter().flatten().flatten().copied().collect();
        let motion: Vec<usize> = spec
            .motion
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .copied()
            .collect();
        if let Some(&bad) = motion.iter().find(|&&g| g >= nx) {
            return invalid(format!("motion target {bad} is off the grid"));
        }
        Ok(Self {
            p: spec.p,
            beta: spec.beta,
            x_grid: spec.x_grid,
            y_grid: spec.y_grid,
            feasible,
            utility,
            motion,
            projection: spec.projection,
        })
    }

    /// Builds a model from closures. Next states produced by `motion` are
    /// projected to the nearest point of `x_grid` (ties go to the lower
    /// point); the largest projection error is recorded in the model.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fns(
        p: StochasticMatrix,
        beta: NonnegativeMatrix,
        x_grid: Vec<f64>,
        y_grid: Vec<f64>,
        feasible: impl Fn(usize, f64, f64) -> bool,
        utility: impl Fn(usize, f64, f64) -> f64,
        motion: impl Fn(usize, usize, f64, f64) -> f64,
    ) -> Result<Self, DPError> {
        let n = p.dim();
        let (nx, ny) = (x_grid.len(), y_grid.len());
        let mut max_error = 0.0f64;
        let spec = DPModelSpec {
            feasible: (0..n)
                .map(|i| {
                    (0..nx)
                        .map(|x| (0..ny).filter(|&y| feasible(i, x_grid[x], y_grid[y])).collect())
                        .collect()
                })
                .collect(),
            utility: (0..n)
                .map(|i| {
                    (0..nx)
                        .map(|x| (0..ny).map(|y| utility(i, x_grid[x], y_grid[y])).collect())
                        .collect()
                })
                .collect(),
            motion: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..nx)
                                .map(|x| {
                                    (0..ny)
                                        .map(|y| {
                                            let target = motion(i, j, x_grid[x], y_grid[y]);
                                            let (k, err) = nearest_grid_point(&x_grid, target);
                                            max_error = max_error.max(err);
                                            k
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            projection: None,
            p,
            beta,
            x_grid: x_grid.clone(),
            y_grid,
        };
        let mut spec = spec;
        spec.projection = Some(Projection {
            kind: "nearest_grid_point".into(),
            max_error,
        });
        Self::new(spec)
    }

    pub fn states(&self) -> usize {
        self.p.dim()
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.p
    }

    pub fn beta(&self) -> &NonnegativeMatrix {
        &self.beta
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn y_grid(&self) -> &[f64] {
        &self.y_grid
    }

    pub fn projection(&self) -> Option<&Projection> {
        self.projection.as_ref()
    }

    pub fn feasible(&self, state: usize, point: usize) -> &[usize] {
        &self.feasible[state * self.x_grid.len() + point]
    }

    #[inline]
    pub fn utility(&self, state: usize, point: usize, control: usize) -> f64 {
        let (nx, ny) = (self.x_grid.len(), self.y_grid.len());
        self.utility[(state * nx + point) * ny + control]
    }

    /// Grid index of `g_ij(x, y)`.
    #[inline]
    pub fn next_point(&self, from: usize, to: usize, point: usize, control: usize) -> usize {
        let (n, nx, ny) = (self.states(), self.x_grid.len(), self.y_grid.len());
        self.motion[((from * n + to) * nx + point) * ny + control]
    }

    /// `max |u_i(x, y)|` over feasible triples.
    pub fn utility_bound(&self) -> f64 {
        let mut bound = 0.0f64;
        for i in 0..self.states() {
            for x in 0..self.x_grid.len() {
                for &y in self.feasible(i, x) {
                    bound = bound.max(self.utility(i, x, y).abs());
                }
            }
        }
        bound
    }

    fn spec(&self) -> DPModelSpec {
        let (n, nx, ny) = (self.states(), self.x_grid.len(), self.y_grid.len());
        DPModelSpec {
            p: self.p.clone(),
            beta: self.beta.clone(),
            x_grid: self.x_grid.clone(),
            y_grid: self.y_grid.clone(),
            feasible: (0..n)
                .map(|i| (0..nx).map(|x| self.feasible(i, x).to_vec()).collect())
                .collect(),
            utility: (0..n)
                .map(|i| {
                    (0..nx)
                        .map(|x| (0..ny).map(|y| self.utility(i, x, y)).collect())
                        .collect()
                })
                .collect(),
            motion: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..nx)
                                .map(|x| (0..ny).map(|y| self.next_point(i, j, x, y)).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            projection: self.projection.clone(),
        }
    }
}

impl TryFrom<DPModelSpec> for DPModel {
    type Error = DPError;

    fn try_from(spec: DPModelSpec) -> Result<Self, Self::Error> {
        Self::new(spec)
    }
}

impl From<DPModel> for DPModelSpec {
    fn from(model: DPModel) -> Self {
        model.spec()
    }
}

fn nearest_grid_point(grid: &[f64], target: f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, &x) in grid.iter().enumerate() {
        let err = (x - target).abs();
        if err < best.1 {
            best = (k, err);
        }
    }
    best
}

/// `B = (p_ij beta_ij)`.
pub fn discount_matrix(model: &DPModel) -> NonnegativeMatrix {
    model
        .p
        .matrix()
        .hadamard(&model.beta)
        .expect("P and beta have equal dimensions by construction")
}

/// Control index chosen at each `(state, grid point)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    points: usize,
    choice: Vec<usize>,
}

impl Policy {
    pub fn new(model: &DPModel, choice: Vec<usize>) -> Result<Self, DPError> {
        let nx = model.x_grid.len();
        if choice.len() != model.states() * nx {
            return Err(DPError::Invalid(format!(
                "policy has {} entries, expected {}",
                choice.len(),
                model.states() * nx
            )));
        }
        for (idx, &y) in choice.iter().enumerate() {
            let (i, x) = (idx / nx, idx % nx);
            if model.feasible(i, x).binary_search(&y).is_err() {
                return Err(DPError::InfeasiblePolicy {
                    state: i,
                    point: x,
                    control: y,
                });
            }
        }
        Ok(Self { points: nx, choice })
    }

    pub fn control(&self, state: usize, point: usize) -> usize {
        self.choice[state * self.points + point]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }
}

#[inline]
fn continuation(model: &DPModel, b: &NonnegativeMatrix, v: &GridFunction, i: usize, x: usize, y: usize) -> f64 {
    (0..model.states())
        .map(|j| {
            let w = b.get(i, j);
            if w == 0.0 {
                0.0
            } else {
                w * v.get(j, model.next_point(i, j, x, y))
            }
        })
        .sum()
}

/// Best feasible control and its value at `(i, x)`; ties keep the lowest
/// control index.
fn best_choice(model: &DPModel, b: &NonnegativeMatrix, v: &GridFunction, i: usize, x: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for &y in model.feasible(i, x) {
        let value = model.utility(i, x, y) + continuation(model, b, v, i, x, y);
        if value > best.1 || best.0 == usize::MAX {
            best = (y, value);
        }
    }
    best
}

fn check_shape(model: &DPModel, v: &GridFunction) -> Result<(), DPError> {
    if v.states() != model.states() || v.points() != model.x_grid.len() {
        return Err(DPError::Invalid(format!(
            "value function is {}x{}, model is {}x{}",
            v.states(),
            v.points(),
            model.states(),
            model.x_grid.len()
        )));
    }
    Ok(())
}

pub fn bellman_operator(model: &DPModel, v: &GridFunction) -> Result<GridFunction, DPError> {
    check_shape(model, v)?;
    let b = discount_matrix(model);
    Ok(apply_bellman(model, &b, v))
}

fn apply_bellman(model: &DPModel, b: &NonnegativeMatrix, v: &GridFunction) -> GridFunction {
    let nx = model.x_grid.len();
    let values: Vec<f64> = (0..model.states() * nx)
        .into_par_iter()
        .map(|idx| best_choice(model, b, v, idx / nx, idx % nx).1)
        .collect();
    GridFunction::from_values(model.states(), nx, values)
}

/// The Bellman operator as a self map of grid functions.
pub struct BellmanOperator<'a> {
    model: &'a DPModel,
    b: NonnegativeMatrix,
}

impl<'a> BellmanOperator<'a> {
    pub fn new(model: &'a DPModel) -> Self {
        Self {
            model,
            b: discount_matrix(model),
        }
    }

    pub fn coefficient_matrix(&self) -> &NonnegativeMatrix {
        &self.b
    }
}

impl Operator<GridFunction> for BellmanOperator<'_> {
    fn apply(&self, v: &GridFunction) -> Result<GridFunction, OperatorError> {
        check_shape(self.model, v).map_err(|e| OperatorError(e.to_string()))?;
        Ok(apply_bellman(self.model, &self.b, v))
    }
}

pub fn greedy_policy(model: &DPModel, v: &GridFunction) -> Result<Policy, DPError> {
    check_shape(model, v)?;
    let b = discount_matrix(model);
    let nx = model.x_grid.len();
    let choice = (0..model.states() * nx)
        .map(|idx| best_choice(model, &b, v, idx / nx, idx % nx).0)
        .collect();
    Ok(Policy { points: nx, choice })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DPSolution {
    pub value: GridFunction,
    pub policy: Policy,
    pub report: ConvergenceReport,
    pub spectral: SpectralCertificate,
}

fn require_contraction(b: &NonnegativeMatrix) -> Result<SpectralCertificate, DPError> {
    let certificate = spectral_radius(b);
    if !certificate.is_subunit() {
        return Err(DPError::NotContraction { certificate });
    }
    Ok(certificate)
}

/// Solves the Bellman equation from `V = 0`.
pub fn solve_dp(model: &DPModel, tol: f64) -> Result<DPSolution, DPError> {
    let opts = PerovOptions {
        tol,
        ..PerovOptions::default()
    };
    solve_dp_from(model, GridFunction::zeros(model.states(), model.x_grid.len()), &opts)
}

pub fn solve_dp_from(model: &DPModel, v0: GridFunction, opts: &PerovOptions) -> Result<DPSolution, DPError> {
    check_shape(model, &v0)?;
    let op = BellmanOperator::new(model);
    let spectral = require_contraction(&op.b)?;
    let metric = GridSupMetric {
        states: model.states(),
    };
    let (value, report) = perov_iterate(&op, v0, &metric, &op.b, opts)?;
    let policy = greedy_policy(model, &value)?;
    Ok(DPSolution {
        value,
        policy,
        report,
        spectral,
    })
}

/// Value of following `policy` forever: the fixed point of the Bellman
/// recursion without the maximization.
///
/// Small systems are solved directly as `(I - Q) V = u_sigma`; larger ones by
/// iterating the policy operator.
pub fn policy_value(model: &DPModel, policy: &Policy, tol: f64) -> Result<GridFunction, DPError> {
    let b = discount_matrix(model);
    require_contraction(&b)?;
    let n = model.states();
    let nx = model.x_grid.len();
    if policy.choice.len() != n * nx {
        return Err(DPError::Invalid("policy does not match the model".into()));
    }
    let size = n * nx;
    if size <= DENSE_POLICY_LIMIT {
        let mut q = DMatrix::<f64>::identity(size, size);
        let mut rhs = DVector::<f64>::zeros(size);
        for i in 0..n {
            for x in 0..nx {
                let row = i * nx + x;
                let y = policy.control(i, x);
                rhs[row] = model.utility(i, x, y);
                for j in 0..n {
                    let target = j * nx + model.next_point(i, j, x, y);
                    q[(row, target)] -= b.get(i, j);
                }
            }
        }
        let solution = q
            .lu()
            .solve(&rhs)
            .ok_or(DPError::Matrix(MatrixError::Singular))?;
        return Ok(GridFunction::from_values(n, nx, solution.iter().copied().collect()));
    }
    let op = |v: &GridFunction| {
        GridFunction::from_fn(n, nx, |i, x| {
            let y = policy.control(i, x);
            model.utility(i, x, y) + continuation(model, &b, v, i, x, y)
        })
    };
    let opts = PerovOptions {
        tol,
        ..PerovOptions::default()
    };
    let (v, _) = perov_iterate(&op, GridFunction::zeros(n, nx), &GridSupMetric { states: n }, &b, &opts)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_state(u: f64) -> DPModel {
        DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![1.1, 0.2], vec![1.1, 0.2]]).unwrap(),
            vec![0.0],
            vec![0.0],
            |_, _, _| true,
            move |_, _, _| u,
            |_, _, x, _| x,
        )
        .unwrap()
    }

    fn single(beta: f64, u: f64) -> DPModel {
        DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![beta]]).unwrap(),
            vec![0.0],
            vec![0.0],
            |_, _, _| true,
            move |_, _, _| u,
            |_, _, x, _| x,
        )
        .unwrap()
    }

    /// Two wealth levels, consumption 0 or 1 unit; utility decreasing in the
    /// control index for the tie-breaking and corner tests.
    fn decreasing_utility(beta: f64) -> DPModel {
        DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![beta]]).unwrap(),
            vec![0.0, 1.0],
            vec![0.0, 1.0, 2.0],
            |_, _, _| true,
            |_, _, y| -y,
            |_, _, _, y| y.min(1.0),
        )
        .unwrap()
    }

    #[test]
    fn discount_matrix_examples() {
        let b = discount_matrix(&single(0.5, 1.0));
        assert_eq!(b.to_rows(), vec![vec![0.5]]);
        let b = discount_matrix(&two_state(1.0));
        let expected = [[0.55, 0.1], [0.55, 0.1]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b.get(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
        // Rank one: eigenvalues 0 and the trace.
        assert!((spectral_radius(&b).rho - 0.65).abs() < 1e-12);
        assert_eq!(spectral_radius(&discount_matrix(&single(0.0, 1.0))).rho, 0.0);
    }

    #[test]
    fn bellman_examples() {
        let tv = bellman_operator(&single(0.5, 1.0), &GridFunction::zeros(1, 1)).unwrap();
        assert_eq!(tv.values(), &[1.0]);
        let tv = bellman_operator(&two_state(1.0), &GridFunction::zeros(2, 1)).unwrap();
        assert_eq!(tv.values(), &[1.0, 1.0]);

        let model = two_state(1.0);
        let b = discount_matrix(&model);
        let c = [3.0, -2.0];
        let t0 = bellman_operator(&model, &GridFunction::zeros(2, 1)).unwrap();
        let tc = bellman_operator(&model, &GridFunction::zeros(2, 1).add_per_state(&c)).unwrap();
        let bc = b.mul_vec(&c);
        for i in 0..2 {
            assert!((tc.get(i, 0) - (t0.get(i, 0) + bc[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_examples() {
        let sol = solve_dp(&single(0.5, 1.0), 1e-12).unwrap();
        assert!((sol.value.get(0, 0) - 2.0).abs() < 1e-12);

        let sol = solve_dp(&two_state(1.0), 1e-12).unwrap();
        for i in 0..2 {
            assert!((sol.value.get(i, 0) - 1.0 / 0.35).abs() < 1e-10);
        }
        assert!(sol.report.converged());
        assert!((sol.spectral.rho - 0.65).abs() < 1e-12);

        let sol = solve_dp(&two_state(0.0), 1e-12).unwrap();
        assert_eq!(sol.value.values(), &[0.0, 0.0]);
    }

    #[test]
    fn refuses_rho_at_least_one() {
        let model = DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![1.5, 0.5], vec![1.5, 0.5]]).unwrap(),
            vec![0.0],
            vec![0.0],
            |_, _, _| true,
            |_, _, _| 1.0,
            |_, _, x, _| x,
        )
        .unwrap();
        match solve_dp(&model, 1e-10) {
            Err(DPError::NotContraction { certificate }) => assert!((certificate.rho - 1.0).abs() < 1e-10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn greedy_examples() {
        let model = single(0.5, 1.0);
        let policy = greedy_policy(&model, &GridFunction::zeros(1, 1)).unwrap();
        assert_eq!(policy.choices(), &[0]);

        let model = decreasing_utility(0.0);
        let policy = greedy_policy(&model, &GridFunction::zeros(1, 2)).unwrap();
        assert_eq!(policy.choices(), &[0, 0]);

        // Flat utility: every control ties, the lowest index wins.
        let flat = DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![0.0]]).unwrap(),
            vec![0.0],
            vec![0.0, 1.0, 2.0],
            |_, _, y| y > 0.5,
            |_, _, _| 1.0,
            |_, _, x, _| x,
        )
        .unwrap();
        assert_eq!(greedy_policy(&flat, &GridFunction::zeros(1, 1)).unwrap().choices(), &[1]);
    }

    #[test]
    fn policy_value_examples() {
        let model = two_state(1.0);
        let policy = Policy::new(&model, vec![0, 0]).unwrap();
        let v = policy_value(&model, &policy, 1e-12).unwrap();
        for i in 0..2 {
            assert!((v.get(i, 0) - 1.0 / 0.35).abs() < 1e-12);
        }
        let model = decreasing_utility(0.0);
        let policy = Policy::new(&model, vec![1, 2]).unwrap();
        let v = policy_value(&model, &policy, 1e-12).unwrap();
        assert_eq!(v.values(), &[-1.0, -2.0]);
    }

    #[test]
    fn policy_must_be_feasible() {
        let model = DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![0.5]]).unwrap(),
            vec![0.0],
            vec![0.0, 1.0],
            |_, _, y| y == 0.0,
            |_, _, _| 1.0,
            |_, _, x, _| x,
        )
        .unwrap();
        assert!(matches!(
            Policy::new(&model, vec![1]),
            Err(DPError::InfeasiblePolicy { control: 1, .. })
        ));
    }

    #[test]
    fn empty_feasible_set_is_rejected() {
        let err = DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![0.5]]).unwrap(),
            vec![0.0, 1.0],
            vec![0.0],
            |_, x, _| x < 0.5,
            |_, _, _| 1.0,
            |_, _, x, _| x,
        )
        .unwrap_err();
        assert_eq!(err, DPError::EmptyFeasibleSet { state: 0, point: 1 });
    }

    #[test]
    fn projection_is_recorded() {
        let model = DPModel::from_fns(
            StochasticMatrix::from_rows(vec![vec![1.0]]).unwrap(),
            NonnegativeMatrix::from_rows(vec![vec![0.5]]).unwrap(),
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0],
            |_, _, _| true,
            |_, _, _| 1.0,
            |_, _, x, y| 0.7 * x + 0.4 * y,
        )
        .unwrap();
        let proj = model.projection().unwrap();
        assert_eq!(proj.kind, "nearest_grid_point");
        // max over x in {0,1,2}, y in {0,1}: 0.7x + 0.4y vs nearest integer.
        assert!((proj.max_error - 0.4).abs() < 1e-12);
        assert_eq!(model.next_point(0, 0, 2, 1), 2);
    }

    #[test]
    fn spec_round_trip() {
        let model = two_state(1.0);
        let json = serde_json::to_string(&model).unwrap();
        let back: DPModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
