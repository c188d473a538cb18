use std::path::PathBuf;

use proptest::prelude::*;
use rand::Rng;

use perov::io::{Model, ModelFile};
use perov::ndmatrix::spectral_radius;
use perov::perov::{blackwell_check, verify_grid_contraction};
use perov::sampling::{random_marginal, random_stochastic_rows, rng, savings_samples};
use perov::savings::{
    contraction_matrix, euler_residuals, euler_update, marginal_to_consumption, solve_savings_from, GridSpec,
    SavingsModel, SavingsModelSpec, ShockDistribution, TimeIteration, Utility,
};
use perov::{GridFunction, PerovOptions, StochasticMatrix};

fn fixture(name: &str) -> SavingsModel {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    match ModelFile::parse(&std::fs::read_to_string(path).unwrap()).unwrap().model {
        Model::Savings(m) => m,
        other => panic!("not a savings model: {:?}", other.kind()),
    }
}

/// Markov states, two return shocks, income at least twice the bottom of
/// the grid, discount factors scaled to `target`.
fn random_model(seed: u64, states: usize, gamma: f64, target: f64) -> SavingsModel {
    let mut r = rng(seed);
    let p = StochasticMatrix::from_rows(random_stochastic_rows(&mut r, states)).unwrap();
    let table = |r: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| -> Vec<Vec<Vec<f64>>> {
        (0..states)
            .map(|_| (0..states).map(|_| (0..2).map(|_| r.gen_range(lo..hi)).collect()).collect())
            .collect()
    };
    let spec = SavingsModelSpec {
        p,
        shocks: ShockDistribution {
            support: vec![-1.0, 1.0],
            weights: vec![0.5, 0.5],
        },
        beta_table: table(&mut r, 0.6, 1.2),
        r_table: table(&mut r, 0.9, 1.1),
        y_table: table(&mut r, 0.2, 1.0),
        utility: Utility::Crra { gamma },
        grid: GridSpec::geometric(0.1, 10.0, 30),
    };
    let model = SavingsModel::new(spec).unwrap();
    let rho = spectral_radius(&contraction_matrix(&model)).rho;
    model.with_beta_scaled(target / rho).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn time_iteration_is_a_monotone_contraction(seed in any::<u64>(), states in 1usize..=3, gamma in 0.5f64..4.0, target in 0.3f64..0.95) {
        let model = random_model(seed, states, gamma, target);
        let op = TimeIteration::new(&model);
        let s = savings_samples(&mut rng(seed), &model, 20);
        let contraction = verify_grid_contraction(&op, op.coefficient_matrix(), &s.pairs).unwrap();
        prop_assert!(contraction.passed(), "{:?}", contraction);
        let blackwell = blackwell_check(&op, op.coefficient_matrix(), &s.ordered, &s.functions, &s.constants).unwrap();
        prop_assert!(blackwell.passed(), "{:?}", blackwell);
    }

    #[test]
    fn update_is_decreasing_and_feasible(seed in any::<u64>(), states in 1usize..=3, gamma in 0.5f64..4.0, target in 0.3f64..0.95) {
        let model = random_model(seed, states, gamma, target);
        let f = random_marginal(&mut rng(seed ^ 1), &model, 0.05);
        let tf = euler_update(&model, &f).unwrap();
        let c = marginal_to_consumption(&model, &tf).unwrap();
        for i in 0..states {
            prop_assert!(tf.row(i).windows(2).all(|w| w[1] <= w[0]));
            for (k, &a) in model.grid().iter().enumerate() {
                prop_assert!(c.get(i, k) >= 0.0 && c.get(i, k) <= a);
            }
        }
    }
}

#[test]
fn stochastic_fixture_contracts_on_sampled_pairs() {
    let model = fixture("savings_stochastic.json");
    let op = TimeIteration::new(&model);
    assert!((spectral_radius(op.coefficient_matrix()).rho - 0.9).abs() < 1e-12);
    let s = savings_samples(&mut rng(11), &model, 100);
    let contraction = verify_grid_contraction(&op, op.coefficient_matrix(), &s.pairs).unwrap();
    assert_eq!(contraction.violations, 0, "{contraction:?}");
    let blackwell = blackwell_check(&op, op.coefficient_matrix(), &s.ordered, &s.functions, &s.constants).unwrap();
    assert!(blackwell.passed(), "{blackwell:?}");
}

#[test]
fn fixed_point_is_unique_and_solves_the_euler_equation() {
    let model = fixture("savings_stochastic.json");
    let tol = 1e-9;
    let opts = PerovOptions::new(tol, 100_000);
    let grid = model.grid().to_vec();
    let all = GridFunction::from_fn(2, grid.len(), |_, k| grid[k]);
    let half = GridFunction::from_fn(2, grid.len(), |_, k| 0.5 * grid[k]);
    let a = solve_savings_from(&model, &all, &opts).unwrap();
    let b = solve_savings_from(&model, &half, &opts).unwrap();
    assert!(a.report.converged() && b.report.converged());
    for (x, y) in a.marginal.values().iter().zip(b.marginal.values()) {
        assert!((x - y).abs() <= 10.0 * tol, "{x} vs {y}");
    }
    for (x, y) in a.consumption.values().iter().zip(b.consumption.values()) {
        assert!((x - y).abs() <= 10.0 * tol, "{x} vs {y}");
    }
    let residuals = euler_residuals(&model, &a.marginal).unwrap();
    for i in 0..2 {
        for k in 1..grid.len() - 1 {
            assert!(residuals.get(i, k) <= 1e-8, "residual {} at ({i}, {k})", residuals.get(i, k));
        }
    }
}

#[test]
fn deterministic_crra_fixture_matches_linear_rule() {
    let model = fixture("savings_crra.json");
    let sol = solve_savings_from(
        &model,
        &GridFunction::from_fn(1, model.grid().len(), |_, k| model.grid()[k]),
        &PerovOptions::new(1e-6, 100_000),
    )
    .unwrap();
    assert!(sol.report.converged());
    let (beta, r, gamma): (f64, f64, f64) = (0.96, 1.02, 2.0);
    let theta = 1.0 - (beta * r.powf(1.0 - gamma)).powf(1.0 / gamma);
    let n = model.grid().len();
    let worst = (n / 6..n - n / 6)
        .map(|k| {
            let a = model.grid()[k];
            (sol.consumption.get(0, k) - theta * a).abs() / (theta * a)
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "max relative error {worst}");
}
