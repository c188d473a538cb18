//! Seeded generators for the sample sets used by the contraction and
//! Blackwell checks.
//!
//! Every generator draws from a ChaCha8 stream, so a seed fixes the sample
//! across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::GridFunction;
use crate::markov_dp::DPModel;
use crate::ndmatrix::{spectral_radius, NonnegativeMatrix};
use crate::savings::{consumption_to_marginal, SavingsModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in `[-scale, scale]`.
pub fn random_grid_function<R: Rng + ?Sized>(rng: &mut R, states: usize, points: usize, scale: f64) -> GridFunction {
    GridFunction::from_fn(states, points, |_, _| scale * (2.0 * rng.gen::<f64>() - 1.0))
}

/// Uniform values in `[0, scale]`.
pub fn nonnegative_perturbation<R: Rng + ?Sized>(rng: &mut R, states: usize, points: usize, scale: f64) -> GridFunction {
    GridFunction::from_fn(states, points, |_, _| scale * rng.gen::<f64>())
}

/// Discounting is checked on every `functions x constants` combination; the
/// constant set is capped at this size.
pub const MAX_CONSTANTS: usize = 10;

/// Per-state constants uniform in `[0, scale]`.
pub fn random_constants<R: Rng + ?Sized>(rng: &mut R, states: usize, scale: f64) -> Vec<f64> {
    (0..states).map(|_| scale * rng.gen::<f64>()).collect()
}

/// Independent pairs of bounded grid functions.
pub fn grid_pairs<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    states: usize,
    points: usize,
    scale: f64,
) -> Vec<(GridFunction, GridFunction)> {
    (0..n)
        .map(|_| {
            let f = random_grid_function(rng, states, points, scale);
            let g = random_grid_function(rng, states, points, scale);
            (f, g)
        })
        .collect()
}

/// `(f, f + h)` with `h >= 0`, so the order premise holds by construction.
pub fn ordered_pairs<R: Rng + ?Sized>(
    rng: &mut R,
    functions: &[GridFunction],
    scale: f64,
) -> Vec<(GridFunction, GridFunction)> {
    functions
        .iter()
        .map(|f| {
            let h = nonnegative_perturbation(rng, f.states(), f.points(), scale);
            (f.clone(), f.add(&h))
        })
        .collect()
}

/// Sample sets for the Bellman operator of a DP model, scaled by its utility
/// bound.
pub fn dp_samples<R: Rng + ?Sized>(rng: &mut R, model: &DPModel, n: usize) -> CheckSamples {
    let states = model.states();
    let points = model.x_grid().len();
    let scale = 10.0 * model.utility_bound().max(1.0);
    let pairs = grid_pairs(rng, n, states, points, scale);
    let functions: Vec<GridFunction> = pairs.iter().map(|(f, _)| f.clone()).collect();
    let ordered = ordered_pairs(rng, &functions, scale);
    let constants = (0..n.min(MAX_CONSTANTS)).map(|_| random_constants(rng, states, scale)).collect();
    CheckSamples {
        pairs,
        ordered,
        functions,
        constants,
    }
}

/// Consumption increasing in `a` with `c / a` in `[lo, 1]`.
pub fn random_consumption<R: Rng + ?Sized>(rng: &mut R, model: &SavingsModel, lo: f64) -> GridFunction {
    let grid = model.grid();
    let mut values = Vec::with_capacity(model.states() * grid.len());
    for _ in 0..model.states() {
        let mut prev = 0.0_f64;
        for &a in grid {
            let c = (a * (lo + (1.0 - lo) * rng.gen::<f64>())).max(prev);
            values.push(c);
            prev = c;
        }
    }
    GridFunction::from_values(model.states(), grid.len(), values)
}

/// Decreasing marginal utility candidate from [`random_consumption`].
pub fn random_marginal<R: Rng + ?Sized>(rng: &mut R, model: &SavingsModel, lo: f64) -> GridFunction {
    consumption_to_marginal(model, &random_consumption(rng, model, lo))
        .expect("sampled consumption lies in (0, a]")
}

/// Sample sets for the time-iteration operator. Ordered pairs are
/// `(f, (1 + s) f + t)` with `s, t >= 0` per state, which stay decreasing.
pub fn savings_samples<R: Rng + ?Sized>(rng: &mut R, model: &SavingsModel, n: usize) -> CheckSamples {
    const LO: f64 = 0.05;
    let states = model.states();
    let pairs: Vec<_> = (0..n)
        .map(|_| (random_marginal(rng, model, LO), random_marginal(rng, model, LO)))
        .collect();
    let functions: Vec<GridFunction> = pairs.iter().map(|(f, _)| f.clone()).collect();
    let ordered = functions
        .iter()
        .map(|f| {
            let s = random_constants(rng, states, 0.5);
            let t = random_constants(rng, states, 1.0);
            let g = GridFunction::from_fn(states, f.points(), |i, k| (1.0 + s[i]) * f.get(i, k) + t[i]);
            (f.clone(), g)
        })
        .collect();
    // Constants on the order of a typical candidate value.
    let scale = functions
        .first()
        .map_or(1.0, |f| f.values().iter().sum::<f64>() / f.values().len() as f64);
    let constants = (0..n.min(MAX_CONSTANTS)).map(|_| random_constants(rng, states, scale)).collect();
    CheckSamples {
        pairs,
        ordered,
        functions,
        constants,
    }
}

/// Inputs for a joint contraction and Blackwell check.
#[derive(Debug, Clone)]
pub struct CheckSamples {
    pub pairs: Vec<(GridFunction, GridFunction)>,
    pub ordered: Vec<(GridFunction, GridFunction)>,
    pub functions: Vec<GridFunction>,
    pub constants: Vec<Vec<f64>>,
}

/// Dense matrix with entries uniform in `[0, 1)`.
pub fn random_nonnegative_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> NonnegativeMatrix {
    NonnegativeMatrix::from_fn(n, |_, _| rng.gen::<f64>()).expect("entries in [0, 1)")
}

/// Rescales `b` so that its spectral radius equals `target`.
pub fn scale_to_radius(b: &NonnegativeMatrix, target: f64) -> NonnegativeMatrix {
    let rho = spectral_radius(b).rho;
    if rho == 0.0 {
        return b.clone();
    }
    b.scaled(target / rho).expect("nonnegative scale")
}

/// Random row-stochastic matrix with positive entries.
pub fn random_stochastic_rows<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|x| x / s).collect()
        })
        .collect()
}
