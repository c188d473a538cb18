#![allow(dead_code)]

use rand::Rng;

use perov::affine::{AffineModel, AffineSpec};
use perov::markov_dp::DPModel;
use perov::sampling::{random_nonnegative_matrix, random_stochastic_rows, rng, scale_to_radius};
use perov::{NonnegativeMatrix, StochasticMatrix};

/// `T(v) = Av + b` with `|A|` of spectral radius `target` and random signs.
pub fn random_affine(seed: u64, n: usize, target: f64) -> AffineModel {
    let mut r = rng(seed);
    let b = scale_to_radius(&random_nonnegative_matrix(&mut r, n), target);
    let a = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if r.gen::<bool>() { b.get(i, j) } else { -b.get(i, j) })
                .collect()
        })
        .collect();
    let offset = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
    AffineModel::new(AffineSpec {
        a,
        b: offset,
        coefficient: None,
    })
    .unwrap()
}

/// Random finite DP: `nx` wealth levels, controls `0..nx` (consume `y <= x`),
/// Markov income in `{0, 1}` and discount factors, some above one, scaled so
/// that `rho(p_ij beta_ij) = target`.
pub fn random_dp(seed: u64, states: usize, nx: usize, target: f64) -> DPModel {
    let mut r = rng(seed);
    let p = StochasticMatrix::from_rows(random_stochastic_rows(&mut r, states)).unwrap();
    let raw = NonnegativeMatrix::from_fn(states, |_, _| r.gen_range(0.2..1.6)).unwrap();
    let rho = perov::ndmatrix::spectral_radius(&p.matrix().hadamard(&raw).unwrap()).rho;
    let beta = raw.scaled(target / rho).unwrap();
    let income: Vec<f64> = (0..states).map(|_| f64::from(r.gen_range(0..2u8))).collect();
    let weights: Vec<f64> = (0..states).map(|_| r.gen_range(0.5..1.5)).collect();
    let top = (nx - 1) as f64;
    let grid: Vec<f64> = (0..nx).map(|k| k as f64).collect();
    DPModel::from_fns(
        p,
        beta,
        grid.clone(),
        grid,
        |_, x, y| y <= x,
        move |i, _, y| weights[i] * (1.0 + y).ln(),
        move |_, j, x, y| (x - y + income[j]).min(top),
    )
    .unwrap()
}
