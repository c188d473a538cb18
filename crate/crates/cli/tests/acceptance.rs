//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use serde_json::Value;

use perov::affine::AffineModel;
use perov::asset_pricing::{pd_ratio_closed_form, pd_ratio_iterative, AssetModel};
use perov::io::{Model, ModelFile};
use perov::markov_dp::{solve_dp_from, BellmanOperator};
use perov::ndmatrix::{gelfand_estimate, spectral_radius};
use perov::perov::{perov_iterate, perov_iterate_observed, AbsDiffMetric, Operator};
use perov::sampling::{dp_samples, random_nonnegative_matrix, random_stochastic_rows, rng, savings_samples, scale_to_radius};
use perov::savings::TimeIteration;
use perov::{GridFunction, NonnegativeMatrix, PerovOptions, StochasticMatrix};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn load(name: &str) -> Model {
    ModelFile::parse(&fs::read_to_string(fixture(name)).unwrap()).unwrap().model
}

fn perov_cmd(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_perov"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("PEROV_THREADS", t),
        None => cmd.env_remove("PEROV_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Gaussian elimination with partial pivoting for `(I - B) x = b`.
fn dense_solve(b: &NonnegativeMatrix, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| f64::from(u8::from(i == j)) - b.get(i, j)).collect();
            row.push(rhs[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..=n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// The random suite shared by criteria 1 to 3: 50 maps `T(v) = Bv + b`,
/// dimensions cycling through 1..=10, `rho(B)` uniform on [0.05, 0.95].
struct Case {
    b: NonnegativeMatrix,
    offset: Vec<f64>,
}

fn random_suite() -> Vec<Case> {
    let mut r = rng(2024);
    (0..50)
        .map(|k| {
            let n = 1 + k % 10;
            let target = r.gen_range(0.05..0.95);
            let b = scale_to_radius(&random_nonnegative_matrix(&mut r, n), target);
            let offset = (0..n).map(|_| r.gen_range(-10.0..10.0)).collect();
            Case { b, offset }
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for case in random_suite() {
        let n = case.offset.len();
        let model = AffineModel::from_nonnegative(&case.b, case.offset.clone()).unwrap();
        let (x, report) =
            perov_iterate(&model, vec![0.0; n], &AbsDiffMetric { dim: n }, &case.b, &PerovOptions::new(1e-10, 100_000))
                .map_err(|e| e.to_string())?;
        check(report.converged(), || "a run did not meet its tolerance".into())?;
        worst = worst.max(sup_dist(&x, &dense_solve(&case.b, &case.offset)));
    }
    check(worst <= 1e-9, || format!("max sup error {worst:e} > 1e-9"))?;
    Ok(format!("50 random affine maps, max sup error vs dense solve {worst:.2e} <= 1e-9"))
}

/// Fits `C = max_{n < N/2} e_n / beta^n` on the first half of the error
/// trace and returns the first step where `e_n > C beta^n`, if any.
fn envelope_breach(errors: &[f64], beta: f64) -> Option<usize> {
    let half = errors.len().div_ceil(2);
    let c = errors[..half]
        .iter()
        .enumerate()
        .map(|(k, e)| e / beta.powi(k as i32))
        .fold(0.0, f64::max);
    errors
        .iter()
        .enumerate()
        .position(|(k, e)| *e > c * beta.powi(k as i32) * (1.0 + 1e-9))
}

fn criterion_2() -> Outcome {
    let mut breaches_low = 0;
    let mut min_len = usize::MAX;
    for (idx, case) in random_suite().iter().enumerate() {
        let n = case.offset.len();
        let model = AffineModel::from_nonnegative(&case.b, case.offset.clone()).unwrap();
        let xstar = dense_solve(&case.b, &case.offset);
        let mut errors = Vec::new();
        let (_, report) = perov_iterate_observed(
            &model,
            vec![0.0; n],
            &AbsDiffMetric { dim: n },
            &case.b,
            &PerovOptions::new(1e-10, 100_000),
            |_, x| errors.push(sup_dist(x, &xstar)),
        )
        .map_err(|e| e.to_string())?;
        min_len = min_len.min(errors.len());
        let beta = 0.5 * (report.rho + 1.0);
        if let Some(k) = envelope_breach(&errors, beta) {
            return Err(format!("run {idx}: envelope with beta = {beta} fails at n = {k}"));
        }
        if envelope_breach(&errors, 0.9 * report.rho).is_some() {
            breaches_low += 1;
        }
    }
    check(breaches_low > 0, || "envelope with beta = 0.9 rho never failed".into())?;
    Ok(format!(
        "envelope C beta^n with beta = (rho+1)/2 holds on all 50 runs (C fitted on the first half, traces >= {min_len} steps); beta = 0.9 rho fails on {breaches_low}/50"
    ))
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut over = 0;
    let mut worst_4096 = 0.0f64;
    for case in random_suite() {
        let rho = spectral_radius(&case.b).rho;
        let err = (gelfand_estimate(&case.b, 256).value - rho).abs();
        worst = worst.max(err);
        if err > 1e-3 {
            over += 1;
        }
        worst_4096 = worst_4096.max((gelfand_estimate(&case.b, 4096).value - rho).abs());
    }
    let nil = NonnegativeMatrix::from_rows(vec![vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
    let g2 = gelfand_estimate(&nil, 2).value;
    let detail = format!(
        "|gelfand(B, 256) - rho| > 1e-3 on {over}/50 (worst {worst:.2e}); at n = 4096 worst {worst_4096:.2e}; nilpotent gelfand(2) = {g2}"
    );
    if over == 0 && g2 == 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    for name in ["dp_cake.json", "dp_two_state.json"] {
        let Model::Dp(model) = load(name) else { unreachable!() };
        let op = BellmanOperator::new(&model);
        let b = op.coefficient_matrix();
        let s = dp_samples(&mut rng(5), &model, 100);
        let apply = |f: &GridFunction| Operator::apply(&op, f).unwrap();
        let per_state_sup = |f: &GridFunction, g: &GridFunction| -> Vec<f64> {
            (0..f.states()).map(|i| sup_dist(f.row(i), g.row(i))).collect()
        };
        let mut worst = f64::NEG_INFINITY;
        for (f, g) in &s.pairs {
            let lhs = per_state_sup(&apply(f), &apply(g));
            let rhs = b.mul_vec(&per_state_sup(f, g));
            worst = worst.max(lhs.iter().zip(&rhs).map(|(l, r)| l - r).fold(f64::NEG_INFINITY, f64::max));
        }
        let contraction = worst;
        let mut worst = f64::NEG_INFINITY;
        for (f, g) in &s.ordered {
            let (tf, tg) = (apply(f), apply(g));
            worst = worst.max(tf.values().iter().zip(tg.values()).map(|(a, c)| a - c).fold(f64::NEG_INFINITY, f64::max));
        }
        let monotone = worst;
        let mut worst = f64::NEG_INFINITY;
        for f in &s.functions {
            let tf = apply(f);
            for c in &s.constants {
                let lhs = apply(&f.add_per_state(c));
                let rhs = tf.add_per_state(&b.mul_vec(c));
                worst = worst.max(lhs.values().iter().zip(rhs.values()).map(|(l, r)| l - r).fold(f64::NEG_INFINITY, f64::max));
            }
        }
        let discount = worst;
        check(contraction <= 1e-10 && monotone <= 1e-10 && discount <= 1e-10, || {
            format!("{name}: worst excess contraction {contraction:e}, monotonicity {monotone:e}, discounting {discount:e}")
        })?;
        let out = perov_cmd(&["check", fixture(name).to_str().unwrap(), "--samples", "100", "--seed", "5"], None);
        check(out.status.code() == Some(0), || format!("perov check {name} exited {:?}", out.status.code()))?;
        lines.push(format!("{name} worst excess {:.1e}", contraction.max(monotone).max(discount)));
    }
    let out = perov_cmd(&["check", fixture("affine_nonmonotone.json").to_str().unwrap(), "--samples", "100"], None);
    let report = json(&out.stdout);
    let mono = report["blackwell"]["monotonicity"]["violations"].as_u64().unwrap();
    check(out.status.code() == Some(4) && mono > 0, || {
        format!("non-monotone operator: exit {:?}, {mono} monotonicity violations", out.status.code())
    })?;
    Ok(format!(
        "Bellman operator passes contraction, monotonicity and discounting on 100 samples ({}); non-monotone map fails with {mono} violations, exit 4",
        lines.join(", ")
    ))
}

fn criterion_5() -> Outcome {
    let Model::Dp(model) = load("dp_two_state.json") else { unreachable!() };
    let target = 1.0 / 0.35;
    let starts = [GridFunction::zeros(2, 1), GridFunction::constant(2, 1, 100.0), GridFunction::from_rows(&[vec![-50.0], vec![7.0]])];
    let mut worst = 0.0f64;
    for v0 in starts {
        let sol = solve_dp_from(&model, v0, &PerovOptions::new(1e-10, 100_000)).map_err(|e| e.to_string())?;
        worst = worst.max(sol.value.values().iter().map(|v| (v - target).abs()).fold(0.0, f64::max));
    }
    check(worst <= 1e-8, || format!("max error {worst:e}"))?;
    let dir = tempfile::tempdir().unwrap();
    let out = perov_cmd(&["solve", fixture("dp_two_state.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    check(out.status.success(), || format!("perov solve exited {:?}", out.status.code()))?;
    let result = json(&fs::read(dir.path().join("result.json")).unwrap());
    let rows = result["solution"]["dp"]["value"].as_array().unwrap();
    let cli_worst = rows.iter().flat_map(floats).map(|v| (v - target).abs()).fold(0.0, f64::max);
    check(cli_worst <= 1e-8, || format!("CLI value off by {cli_worst:e}"))?;
    let max_beta = model.beta().get(0, 0);
    Ok(format!(
        "beta up to {max_beta}: V* = 1/0.35 in both states from 3 starts (max error {worst:.1e}), CLI max error {cli_worst:.1e}"
    ))
}

fn random_asset(r: &mut impl Rng, n: usize, target: f64) -> AssetModel {
    let p = StochasticMatrix::from_rows(random_stochastic_rows(r, n)).unwrap();
    let m = NonnegativeMatrix::from_fn(n, |_, _| r.gen_range(0.8..1.0)).unwrap();
    let g = NonnegativeMatrix::from_fn(n, |_, _| r.gen_range(0.9..1.15)).unwrap();
    let rho = spectral_radius(&p.matrix().hadamard(&m).unwrap().hadamard(&g).unwrap()).rho;
    AssetModel::new(p, m.scaled(target / rho).unwrap(), g).unwrap()
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = perov_cmd(&["solve", fixture("asset_gordon.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    check(out.status.success(), || format!("Gordon solve exited {:?}", out.status.code()))?;
    let v = floats(&json(&fs::read(dir.path().join("result.json")).unwrap())["solution"]["asset"]["v"]);
    let gordon = v.iter().map(|x| (x - 19.0).abs()).fold(0.0, f64::max);
    check(gordon <= 1e-9, || format!("Gordon v = {v:?}"))?;

    let mut r = rng(77);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let target = r.gen_range(0.5..0.98);
        let model = random_asset(&mut r, 5, target);
        let closed = pd_ratio_closed_form(&model).map_err(|e| e.to_string())?;
        let (iter, _) = pd_ratio_iterative(&model, vec![0.0; 5], &PerovOptions::new(1e-10, 1_000_000)).map_err(|e| e.to_string())?;
        worst = worst.max(sup_dist(closed.values(), iter.values()));
    }
    check(worst <= 1e-8, || format!("closed form vs iteration {worst:e}"))?;

    let dir = tempfile::tempdir().unwrap();
    let out = perov_cmd(&["solve", fixture("asset_unit.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    check(out.status.code() == Some(3), || format!("mG = 1 exited {:?}", out.status.code()))?;
    let cert = &json(&out.stdout)["certificate"];
    let scalar = cert["perron_scalar"].as_f64().unwrap();
    let sums = floats(&cert["partial_sums"]);
    check(scalar > 0.0 && sums.iter().all(|&s| s > 50.0), || format!("certificate u'B1 = {scalar}, sums {sums:?}"))?;
    Ok(format!(
        "Gordon v = 19 (error {gordon:.1e}); 20 random 5-state models agree to {worst:.1e}; mG = 1 exits 3 with u'B1 = {scalar}, min partial sum {:.1}",
        sums.iter().fold(f64::INFINITY, |a, b| a.min(*b))
    ))
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = perov_cmd(&["solve", fixture("savings_crra.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    check(out.status.success(), || format!("solve exited {:?}", out.status.code()))?;
    let result = json(&fs::read(dir.path().join("result.json")).unwrap());
    check(result["convergence"]["terminated"] == "tolerance_met", || "did not converge".into())?;
    let grid = floats(&result["solution"]["savings"]["grid"]);
    let c = floats(&result["solution"]["savings"]["consumption"][0]);
    let (beta, r, gamma): (f64, f64, f64) = (0.96, 1.02, 2.0);
    let theta = 1.0 - (beta * r.powf(1.0 - gamma)).powf(1.0 / gamma);
    let n = grid.len();
    let worst = (n / 6..n - n / 6).map(|k| (c[k] - theta * grid[k]).abs() / (theta * grid[k])).fold(0.0, f64::max);
    check(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "c(a) = theta a with theta = {theta:.6}: max relative error {worst:.2e} on the interior {} of {n} points, {} iterations",
        n - 2 * (n / 6),
        result["convergence"]["iterations"]
    ))
}

fn criterion_8() -> Outcome {
    let Model::Savings(model) = load("savings_stochastic.json") else { unreachable!() };
    let op = TimeIteration::new(&model);
    let b = op.coefficient_matrix();
    let rho = spectral_radius(b).rho;
    check((rho - 0.9).abs() <= 1e-12, || format!("rho(B) = {rho}"))?;
    let s = savings_samples(&mut rng(8), &model, 100);
    let mut worst = f64::NEG_INFINITY;
    for (f, g) in &s.pairs {
        let (tf, tg) = (Operator::apply(&op, f).unwrap(), Operator::apply(&op, g).unwrap());
        let before: Vec<f64> = (0..2).map(|i| sup_dist(f.row(i), g.row(i))).collect();
        let after: Vec<f64> = (0..2).map(|i| sup_dist(tf.row(i), tg.row(i))).collect();
        let bound = b.mul_vec(&before);
        for (l, r) in after.iter().zip(&bound) {
            worst = worst.max((l - r) / r.max(1.0));
        }
    }
    check(worst <= 1e-10, || format!("d(Tf, Tg) exceeds B d(f, g) by {worst:e} (relative)"))?;
    let out = perov_cmd(&["check", fixture("savings_stochastic.json").to_str().unwrap(), "--samples", "100", "--seed", "8"], None);
    check(out.status.success(), || format!("perov check exited {:?}", out.status.code()))?;

    let dir = tempfile::tempdir().unwrap();
    let out = perov_cmd(
        &["solve", fixture("savings_stochastic.json").to_str().unwrap(), "--tol", "1e-9", "--out", dir.path().to_str().unwrap()],
        None,
    );
    check(out.status.success(), || format!("solve exited {:?}", out.status.code()))?;
    let rows = read_csv(&dir.path().join("solution.csv"));
    let points = model.grid().len();
    let mut residual = 0.0f64;
    for (idx, row) in rows.iter().enumerate() {
        let k = idx % points;
        if k > 0 && k + 1 < points {
            residual = residual.max(row[4].parse::<f64>().unwrap());
        }
    }
    check(residual <= 1e-8, || format!("interior Euler residual {residual:e}"))?;
    Ok(format!(
        "rho(B) = {rho}; d(Tf, Tg) <= B d(f, g) on 100 sampled pairs (largest (lhs - rhs) / max(1, rhs) = {worst:.2}); interior Euler residual {residual:.1e}"
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = perov_cmd(
        &[
            "solve",
            fixture("dp_two_state.json").to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--validate",
            "10000",
            "200",
            "9",
        ],
        None,
    );
    check(out.status.success(), || format!("validated solve exited {:?}", out.status.code()))?;
    let result = json(&fs::read(dir.path().join("result.json")).unwrap());
    let mut lines = Vec::new();
    for entry in result["validation"].as_array().unwrap() {
        let e = &entry["estimate"];
        let (mean, se, tb) = (e["mean"].as_f64().unwrap(), e["std_error"].as_f64().unwrap(), e["truncation_bound"].as_f64().unwrap());
        let target = entry["target"].as_f64().unwrap();
        check(e["n"] == 10000 && e["horizon"] == 200, || "wrong simulation size".into())?;
        check((mean - target).abs() <= 3.0 * se + tb, || format!("DP estimate {mean} vs {target} (se {se}, tail {tb})"))?;
        lines.push(format!("{mean:.4} vs {target:.4}"));
    }
    let out = perov_cmd(
        &["simulate", fixture("asset_gordon.json").to_str().unwrap(), "--paths", "10000", "--horizon", "200", "--seed", "9"],
        None,
    );
    check(out.status.success(), || format!("simulate exited {:?}", out.status.code()))?;
    let e = &json(&out.stdout)["estimates"][0]["estimate"];
    let (mean, se, tb) = (e["mean"].as_f64().unwrap(), e["std_error"].as_f64().unwrap(), e["truncation_bound"].as_f64().unwrap());
    check((mean - 19.0).abs() <= 3.0 * se + tb, || format!("Gordon estimate {mean} (se {se}, tail {tb})"))?;
    Ok(format!(
        "DP lifetime value {} within 3 se + tail; Gordon PD sum {mean:.4} vs 19 (tail bound {tb:.2e})",
        lines.join(", ")
    ))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let mut runs: Vec<Vec<String>> = Vec::new();
    for m in ["matrix_half.json", "matrix_nilpotent.json", "matrix_stochastic.json"] {
        runs.push(vec!["spectral".into(), fixture(m).display().to_string()]);
    }
    for (m, validate) in [
        ("dp_two_state.json", true),
        ("dp_cake.json", true),
        ("asset_gordon.json", true),
        ("asset_two_state.json", true),
        ("asset_unit.json", false),
        ("savings_crra.json", false),
        ("savings_stochastic.json", true),
        ("affine_three.json", false),
        ("affine_nonmonotone.json", false),
    ] {
        let mut args = vec!["solve".to_string(), fixture(m).display().to_string()];
        if validate {
            args.extend(["--validate", "2000", "100", "3"].map(String::from));
        }
        runs.push(args);
    }
    for m in ["dp_cake.json", "savings_stochastic.json", "affine_nonmonotone.json", "affine_three.json"] {
        runs.push(vec!["check".into(), fixture(m).display().to_string(), "--samples".into(), "30".into(), "--seed".into(), "4".into()]);
    }
    for m in ["dp_cake.json", "asset_two_state.json", "savings_stochastic.json"] {
        runs.push(
            ["simulate", &fixture(m).display().to_string(), "--paths", "2000", "--horizon", "100", "--seed", "6", "--state", "1"]
                .map(String::from)
                .to_vec(),
        );
    }
    let mut compared = 0;
    for args in &runs {
        let mut seen: Option<(Option<i32>, Vec<u8>, Vec<(String, Vec<u8>)>)> = None;
        for threads in [None, Some("1"), Some("3")] {
            let dir = tempfile::tempdir().unwrap();
            let mut full: Vec<String> = args.clone();
            match args[0].as_str() {
                "solve" => full.extend(["--out".to_string(), dir.path().display().to_string()]),
                "simulate" => full.extend(["--out".to_string(), dir.path().join("estimate.json").display().to_string()]),
                _ => {}
            }
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            let out = perov_cmd(&refs, threads);
            let current = (out.status.code(), out.stdout, snapshot(dir.path()));
            match &seen {
                None => seen = Some(current),
                Some(first) => check(*first == current, || format!("`perov {}` differs between runs", args.join(" ")))?,
            }
            compared += 1;
        }
    }
    Ok(format!(
        "{} commands, each run 3 times (PEROV_THREADS unset, 1, 3): {compared} runs with byte-identical stdout and output files",
        runs.len()
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "Perov solver correctness", criterion_1),
        (2, "rate certificate", criterion_2),
        (3, "Gelfand estimate", criterion_3),
        (4, "Blackwell implies contraction", criterion_4),
        (5, "DP with transition discounts above one", criterion_5),
        (6, "asset pricing", criterion_6),
        (7, "savings closed form", criterion_7),
        (8, "savings contraction", criterion_8),
        (9, "Monte Carlo consistency", criterion_9),
        (10, "determinism", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
