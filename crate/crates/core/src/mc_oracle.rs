//! Monte Carlo estimates of discounted sums along simulated Markov paths,
//! used to cross-check solved values.
//!
//! Path `p` draws from `ChaCha8Rng::seed_from_u64(seed)` with stream `p`,
//! so estimates are independent of thread scheduling. Each period consumes a
//! fixed number of uniforms (`f64` in `[0, 1)`, categorical draws by
//! cumulative sums), which also makes runs of different policies on the same
//! seed use common random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asset_pricing::{pricing_matrix, AssetModel};
use crate::grid::GridFunction;
use crate::markov_dp::{discount_matrix, DPModel, Policy};
use crate::ndmatrix::{neumann_inverse, MatrixError, NonnegativeMatrix, StochasticMatrix};
use crate::savings::{consumption_to_marginal, SavingsError, SavingsModel};

/// Relative slack added to bracketing checks to absorb summation rounding.
pub const BRACKET_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Savings(#[from] SavingsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub horizon: usize,
}

impl SimulationConfig {
    pub fn new(seed: u64, n_paths: usize, horizon: usize) -> Self {
        Self { seed, n_paths, horizon }
    }

    fn validate(&self) -> Result<(), SimulationError> {
        if self.n_paths == 0 || self.horizon == 0 {
            return Err(SimulationError::Invalid("n_paths and horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// How the truncation bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationKind {
    /// `sup|payoff| * ||B^{T+1} (I - B)^{-1} 1||` with a known payoff bound.
    GeometricTail,
    /// Same tail factor with the largest payoff observed on the simulated
    /// paths; not a guaranteed bound for unbounded utility.
    ObservedPayoffTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub horizon: usize,
    pub truncation_bound: f64,
    pub truncation_kind: TruncationKind,
    pub excluded_paths: usize,
}

impl Estimate {
    fn from_samples(
        samples: &[f64],
        horizon: usize,
        truncation_bound: f64,
        truncation_kind: TruncationKind,
        excluded_paths: usize,
    ) -> Self {
        let n = samples.len();
        let mean = if n == 0 { f64::NAN } else { samples.iter().sum::<f64>() / n as f64 };
        let std_error = if n < 2 || samples.iter().all(|&x| x == samples[0]) {
            0.0
        } else {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self {
            mean,
            std_error,
            n,
            horizon,
            truncation_bound,
            truncation_kind,
            excluded_paths,
        }
    }

    /// `|mean - target| <= 3 std_error + truncation_bound`, with a relative
    /// rounding slack of [`BRACKET_SLACK`].
    pub fn brackets(&self, target: f64) -> bool {
        (self.mean - target).abs()
            <= 3.0 * self.std_error + self.truncation_bound + BRACKET_SLACK * target.abs().max(1.0)
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Index `j` with `cum_{j-1} <= u < cum_j`; rounding shortfall in the row
/// sum falls to the last positive entry.
fn categorical(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

fn next_state<R: Rng>(p: &StochasticMatrix, i: usize, rng: &mut R) -> usize {
    let u = rng.gen::<f64>();
    categorical((0..p.dim()).map(|j| p.get(i, j)), u)
}

/// Path `i_0, ..., i_T` from stream 0 of `seed`.
pub fn simulate_chain(p: &StochasticMatrix, i0: usize, horizon: usize, seed: u64) -> Result<Vec<usize>, SimulationError> {
    if i0 >= p.dim() {
        return Err(SimulationError::Invalid(format!("initial state {i0} out of range")));
    }
    let mut rng = path_rng(seed, 0);
    let mut path = Vec::with_capacity(horizon + 1);
    let mut i = i0;
    path.push(i);
    for _ in 0..horizon {
        i = next_state(p, i, &mut rng);
        path.push(i);
    }
    Ok(path)
}

/// `||B^{T+1} (I - B)^{-1} 1||`, the tail weight of periods after `T`.
pub fn tail_factor(b: &NonnegativeMatrix, horizon: usize) -> Result<f64, SimulationError> {
    let inv = neumann_inverse(b)?;
    let n = b.dim();
    let mut w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).sum()).collect();
    for _ in 0..=horizon {
        w = b.mul_vec(&w);
    }
    Ok(w.into_iter().fold(0.0, f64::max))
}

/// Running product of discount factors, kept in log space.
#[derive(Clone, Copy)]
struct Discount {
    log: f64,
    zero: bool,
}

impl Discount {
    fn one() -> Self {
        Self { log: 0.0, zero: false }
    }

    fn times(&mut self, factor: f64) {
        if factor == 0.0 {
            self.zero = true;
        } else {
            self.log += factor.ln();
        }
    }

    fn value(&self) -> f64 {
        if self.zero {
            0.0
        } else {
            self.log.exp()
        }
    }
}

fn run_paths<F>(config: &SimulationConfig, path: F) -> Vec<Option<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Option<f64> + Sync,
{
    (0..config.n_paths)
        .into_par_iter()
        .map(|p| path(&mut path_rng(config.seed, p)))
        .collect()
}

/// Mean of `sum_{t=0}^T (prod_{s=1}^t beta_{i_{s-1} i_s}) u_{i_t}(x_t, y_t)`
/// following `policy`.
pub fn simulate_dp_value(
    model: &DPModel,
    policy: &Policy,
    i0: usize,
    x0: usize,
    config: &SimulationConfig,
) -> Result<Estimate, SimulationError> {
    config.validate()?;
    if i0 >= model.states() || x0 >= model.x_grid().len() {
        return Err(SimulationError::Invalid("initial state or grid point out of range".into()));
    }
    if policy.choices().len() != model.states() * model.x_grid().len() {
        return Err(SimulationError::Invalid("policy does not match the model".into()));
    }
    let beta = model.beta();
    let p = model.transition();
    let values = run_paths(config, |rng| {
        let (mut i, mut x) = (i0, x0);
        let mut disc = Discount::one();
        let mut total = 0.0;
        for t in 0..=config.horizon {
            let y = policy.control(i, x);
            total += disc.value() * model.utility(i, x, y);
            if t == config.horizon {
                break;
            }
            let j = next_state(p, i, rng);
            disc.times(beta.get(i, j));
            if disc.zero {
                break;
            }
            x = model.next_point(i, j, x, y);
            i = j;
        }
        Some(total)
    });
    let samples: Vec<f64> = values.into_iter().flatten().collect();
    let bound = model.utility_bound() * tail_factor(&discount_matrix(model), config.horizon)?;
    Ok(Estimate::from_samples(
        &samples,
        config.horizon,
        bound,
        TruncationKind::GeometricTail,
        0,
    ))
}

/// Mean of `sum_{t=1}^T prod_{s=1}^t m_{i_{s-1} i_s} G_{i_{s-1} i_s}`.
pub fn simulate_pd_ratio(model: &AssetModel, i0: usize, config: &SimulationConfig) -> Result<Estimate, SimulationError> {
    config.validate()?;
    if i0 >= model.states() {
        return Err(SimulationError::Invalid(format!("initial state {i0} out of range")));
    }
    let b = pricing_matrix(model);
    let p = model.transition();
    let values = run_paths(config, |rng| {
        let mut i = i0;
        let mut disc = Discount::one();
        let mut total = 0.0;
        for _ in 0..config.horizon {
            let j = next_state(p, i, rng);
            disc.times(model.discount().get(i, j) * model.growth().get(i, j));
            if disc.zero {
                break;
            }
            total += disc.value();
            i = j;
        }
        Some(total)
    });
    let samples: Vec<f64> = values.into_iter().flatten().collect();
    let bound = tail_factor(&b, config.horizon)?;
    Ok(Estimate::from_samples(
        &samples,
        config.horizon,
        bound,
        TruncationKind::GeometricTail,
        0,
    ))
}

/// `d_ij = p_ij E[beta(i, j, zeta)]`, governing expected discount products.
pub fn savings_discount_matrix(model: &SavingsModel) -> NonnegativeMatrix {
    let w = &model.shocks().weights;
    NonnegativeMatrix::from_fn(model.states(), |i, j| {
        model.transition().get(i, j) * (0..w.len()).map(|k| w[k] * model.beta(i, j, k)).sum::<f64>()
    })
    .expect("tables validated finite and nonnegative")
}

/// Mean of `sum_{t=0}^T (prod_{s=1}^t beta_s) u(c_t)` under the consumption
/// rule `c` (interpolated off the grid and clipped to `[0, a]`). Paths on
/// which consumption reaches zero are excluded and counted.
pub fn simulate_savings_value(
    model: &SavingsModel,
    c: &GridFunction,
    i0: usize,
    a0: f64,
    config: &SimulationConfig,
) -> Result<Estimate, SimulationError> {
    config.validate()?;
    if i0 >= model.states() || !(a0 > 0.0 && a0.is_finite()) {
        return Err(SimulationError::Invalid("initial state or wealth out of range".into()));
    }
    let f = consumption_to_marginal(model, c)?;
    let u = model.utility();
    let p = model.transition();
    let w = &model.shocks().weights;
    let results: Vec<Option<(f64, f64)>> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(config.seed, path);
            let (mut i, mut a) = (i0, a0);
            let mut disc = Discount::one();
            let mut total = 0.0;
            let mut max_payoff: f64 = 0.0;
            for t in 0..=config.horizon {
                let ct = model.consumption_at(&f, i, a);
                if !(ct > 0.0) {
                    return None;
                }
                let level = u.level(ct);
                max_payoff = max_payoff.max(level.abs());
                total += disc.value() * level;
                if t == config.horizon {
                    break;
                }
                let j = next_state(p, i, &mut rng);
                let k = categorical(w.iter().copied(), rng.gen::<f64>());
                disc.times(model.beta(i, j, k));
                a = model.gross_return(i, j, k) * (a - ct) + model.income(i, j, k);
                i = j;
                if disc.zero {
                    break;
                }
            }
            Some((total, max_payoff))
        })
        .collect();
    let excluded = results.iter().filter(|r| r.is_none()).count();
    let kept: Vec<(f64, f64)> = results.into_iter().flatten().collect();
    let samples: Vec<f64> = kept.iter().map(|r| r.0).collect();
    let payoff = kept.iter().map(|r| r.1).fold(0.0, f64::max);
    let d = savings_discount_matrix(model);
    let tail = if crate::ndmatrix::spectral_radius(&d).is_subunit() {
        tail_factor(&d, config.horizon)?
    } else {
        f64::INFINITY
    };
    let bound = if payoff == 0.0 { 0.0 } else { payoff * tail };
    Ok(Estimate::from_samples(
        &samples,
        config.horizon,
        bound,
        TruncationKind::ObservedPayoffTail,
        excluded,
    ))
}

/// The consumption rule `min(scale * c, a)` on the grid.
pub fn scaled_consumption(model: &SavingsModel, c: &GridFunction, scale: f64) -> GridFunction {
    let grid = model.grid();
    GridFunction::from_fn(c.states(), c.points(), |i, k| (scale * c.get(i, k)).min(grid[k]))
}

/// Solved rule against `0.9c` and `1.1c` on common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsComparison {
    pub solved: Estimate,
    pub lower: Estimate,
    pub upper: Estimate,
    /// Solved mean is at least each perturbed mean minus three combined
    /// standard errors.
    pub solved_dominates: bool,
}

pub fn compare_savings_policies(
    model: &SavingsModel,
    c: &GridFunction,
    i0: usize,
    a0: f64,
    config: &SimulationConfig,
) -> Result<SavingsComparison, SimulationError> {
    let solved = simulate_savings_value(model, c, i0, a0, config)?;
    let lower = simulate_savings_value(model, &scaled_consumption(model, c, 0.9), i0, a0, config)?;
    let upper = simulate_savings_value(model, &scaled_consumption(model, c, 1.1), i0, a0, config)?;
    let beats = |other: &Estimate| {
        let se = (solved.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        solved.mean >= other.mean - 3.0 * se
    };
    let solved_dominates = beats(&lower) && beats(&upper);
    Ok(SavingsComparison {
        solved,
        lower,
        upper,
        solved_dominates,
    })
}
