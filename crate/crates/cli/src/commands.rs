use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use perov::asset_pricing::{existence_check, pd_ratio_iterative, pricing_matrix, AssetModel, Existence};
use perov::io::{
    affine_solution_csv, asset_solution_csv, convergence_csv, dp_solution_csv, parse_matrix, savings_solution_csv,
    spectral_report, to_json, ConvergenceSummary, Metadata, Model, ModelFile, ModelKind,
};
use perov::markov_dp::{greedy_policy, policy_value, solve_dp_from, BellmanOperator, DPError, DPModel};
use perov::mc_oracle::{
    compare_savings_policies, simulate_dp_value, simulate_pd_ratio, Estimate, SimulationConfig, SimulationError,
};
use perov::ndmatrix::{spectral_radius, SpectralCertificate};
use perov::perov::{blackwell_check, perov_iterate, verify_grid_contraction, AbsDiffMetric, BlackwellReport, ContractionReport, Operator};
use perov::sampling::{self, CheckSamples};
use perov::savings::{euler_residuals, solve_savings, SavingsError, SavingsModel, TimeIteration};
use perov::{ConvergenceReport, GridFunction, PerovOptions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{message}")]
    Divergent { message: String, document: String },
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Unexpected(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Unexpected(_) => 1,
            CliError::Input(_) => 2,
            CliError::Divergent { .. } => 3,
            CliError::Verification(_) => 4,
        }
    }

    /// JSON printed to stdout alongside the error.
    pub fn document(&self) -> Option<&str> {
        match self {
            CliError::Divergent { document, .. } => Some(document),
            _ => None,
        }
    }
}

fn unexpected(e: impl std::fmt::Display) -> CliError {
    CliError::Unexpected(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<ModelFile, CliError> {
    ModelFile::parse(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| unexpected(format!("cannot write {}: {e}", path.display())))
}

pub fn spectral(path: &Path) -> Result<(), CliError> {
    let b = parse_matrix(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    print!("{}", to_json(&spectral_report(&b)));
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct Validate {
    pub n_paths: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Validate {
    fn config(&self) -> SimulationConfig {
        SimulationConfig::new(self.seed, self.n_paths, self.horizon)
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Solution {
    Dp {
        value: Vec<Vec<f64>>,
        policy_index: Vec<Vec<usize>>,
    },
    Asset {
        v: Vec<f64>,
        iterative_v: Vec<f64>,
    },
    Savings {
        grid: Vec<f64>,
        consumption: Vec<Vec<f64>>,
        max_euler_residual: f64,
    },
    Affine {
        x: Vec<f64>,
        dense_x: Vec<f64>,
    },
}

#[derive(Debug, Serialize)]
struct ValidationEntry {
    label: String,
    estimate: Estimate,
    target: Option<f64>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct RunResult {
    schema_version: u32,
    kind: ModelKind,
    model: Metadata,
    spectral: SpectralCertificate,
    convergence: ConvergenceSummary,
    solution: Solution,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation: Option<Vec<ValidationEntry>>,
}

struct Solved {
    spectral: SpectralCertificate,
    report: ConvergenceReport,
    solution: Solution,
    solution_csv: String,
    warnings: Vec<String>,
    validation: Option<Vec<ValidationEntry>>,
}

fn default_tol(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Savings => 1e-6,
        _ => 1e-10,
    }
}

fn options(kind: ModelKind, tol: Option<f64>, max_iter: usize) -> Result<PerovOptions, CliError> {
    let tol = tol.unwrap_or(default_tol(kind));
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Input(format!("--tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(CliError::Input("--max-iter must be at least 1".into()));
    }
    Ok(PerovOptions::new(tol, max_iter))
}

fn divergent<T: Serialize>(kind: ModelKind, certificate: &T, rho: f64) -> CliError {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        status: &'static str,
        kind: ModelKind,
        certificate: &'a T,
    }
    CliError::Divergent {
        message: format!("{kind} model has spectral radius {rho} >= 1; no fixed point is certified"),
        document: to_json(&Doc {
            status: "divergent",
            kind,
            certificate,
        }),
    }
}

fn rows(g: &GridFunction) -> Vec<Vec<f64>> {
    (0..g.states()).map(|i| g.row(i).to_vec()).collect()
}

fn sim_err(e: SimulationError) -> CliError {
    match e {
        SimulationError::Invalid(m) => CliError::Input(m),
        other => unexpected(other),
    }
}

fn dp_error(e: DPError) -> CliError {
    match e {
        DPError::NotContraction { certificate } => divergent(ModelKind::Dp, &certificate, certificate.rho),
        other => unexpected(other),
    }
}

fn savings_error(e: SavingsError) -> CliError {
    match e {
        SavingsError::NotContraction { certificate } => {
            divergent(ModelKind::Savings, &certificate, certificate.rho)
        }
        other => unexpected(other),
    }
}

fn asset_finite(model: &AssetModel) -> Result<Vec<f64>, CliError> {
    match existence_check(model) {
        Existence::Finite { v, .. } => Ok(v.0),
        Existence::Divergent(cert) => Err(divergent(ModelKind::Asset, &cert, cert.rho)),
    }
}

fn dp_validation(model: &DPModel, policy: &perov::markov_dp::Policy, tol: f64, v: Validate) -> Result<Vec<ValidationEntry>, CliError> {
    let target = policy_value(model, policy, tol).map_err(dp_error)?;
    (0..model.states())
        .map(|i| {
            let estimate = simulate_dp_value(model, policy, i, 0, &v.config()).map_err(sim_err)?;
            let t = target.get(i, 0);
            Ok(ValidationEntry {
                label: format!("state {i}, grid point 0"),
                passed: estimate.brackets(t),
                estimate,
                target: Some(t),
            })
        })
        .collect()
}

fn asset_validation(model: &AssetModel, v_closed: &[f64], v: Validate) -> Result<Vec<ValidationEntry>, CliError> {
    (0..model.states())
        .map(|i| {
            let estimate = simulate_pd_ratio(model, i, &v.config()).map_err(sim_err)?;
            Ok(ValidationEntry {
                label: format!("state {i}"),
                passed: estimate.brackets(v_closed[i]),
                estimate,
                target: Some(v_closed[i]),
            })
        })
        .collect()
}

fn median_wealth(model: &SavingsModel) -> f64 {
    model.grid()[model.grid().len() / 2]
}

fn savings_validation(
    model: &SavingsModel,
    c: &GridFunction,
    i0: usize,
    a0: f64,
    config: &SimulationConfig,
) -> Result<Vec<ValidationEntry>, CliError> {
    let cmp = compare_savings_policies(model, c, i0, a0, config).map_err(|e| match e {
        SimulationError::Invalid(m) => CliError::Input(m),
        other => unexpected(other),
    })?;
    let beats = |other: &Estimate| {
        let se = (cmp.solved.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        cmp.solved.mean >= other.mean - 3.0 * se
    };
    Ok(vec![
        ValidationEntry {
            label: format!("state {i0}, wealth {a0}: solved"),
            estimate: cmp.solved.clone(),
            target: None,
            passed: cmp.solved.excluded_paths == 0,
        },
        ValidationEntry {
            label: format!("state {i0}, wealth {a0}: consumption x0.9"),
            passed: beats(&cmp.lower),
            estimate: cmp.lower.clone(),
            target: None,
        },
        ValidationEntry {
            label: format!("state {i0}, wealth {a0}: consumption x1.1"),
            passed: beats(&cmp.upper),
            estimate: cmp.upper.clone(),
            target: None,
        },
    ])
}

fn solve_model(model: &Model, opts: &PerovOptions, validate: Option<Validate>) -> Result<Solved, CliError> {
    let mut warnings = Vec::new();
    match model {
        Model::Dp(m) => {
            let v0 = GridFunction::zeros(m.states(), m.x_grid().len());
            let sol = solve_dp_from(m, v0, opts).map_err(dp_error)?;
            let validation = validate
                .map(|v| dp_validation(m, &sol.policy, opts.tol, v))
                .transpose()?;
            let nx = m.x_grid().len();
            let policy_index = (0..m.states())
                .map(|i| (0..nx).map(|x| sol.policy.control(i, x)).collect())
                .collect();
            Ok(Solved {
                solution_csv: dp_solution_csv(m, &sol.value, &sol.policy).map_err(unexpected)?,
                solution: Solution::Dp {
                    value: rows(&sol.value),
                    policy_index,
                },
                spectral: sol.spectral,
                report: sol.report,
                warnings,
                validation,
            })
        }
        Model::Asset(m) => {
            let v = asset_finite(m)?;
            let (iterative, report) = pd_ratio_iterative(m, vec![0.0; m.states()], opts).map_err(unexpected)?;
            let gap = v
                .iter()
                .zip(iterative.values())
                .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                .fold(0.0, f64::max);
            if gap > 1e-8 {
                warnings.push(format!("closed form and iteration differ by {gap:e} (relative)"));
            }
            let validation = validate.map(|cfg| asset_validation(m, &v, cfg)).transpose()?;
            Ok(Solved {
                spectral: spectral_radius(&pricing_matrix(m)),
                solution_csv: asset_solution_csv(&v).map_err(unexpected)?,
                solution: Solution::Asset {
                    v,
                    iterative_v: iterative.0,
                },
                report,
                warnings,
                validation,
            })
        }
        Model::Savings(m) => {
            let sol = solve_savings(m, opts).map_err(savings_error)?;
            let residuals = euler_residuals(m, &sol.marginal).map_err(unexpected)?;
            let validation = validate
                .map(|v| {
                    let mut out = Vec::new();
                    for i in 0..m.states() {
                        out.extend(savings_validation(m, &sol.consumption, i, median_wealth(m), &v.config())?);
                    }
                    Ok::<_, CliError>(out)
                })
                .transpose()?;
            Ok(Solved {
                solution_csv: savings_solution_csv(m, &sol.consumption, &sol.marginal, &residuals)
                    .map_err(unexpected)?,
                solution: Solution::Savings {
                    grid: m.grid().to_vec(),
                    consumption: rows(&sol.consumption),
                    max_euler_residual: residuals.sup_abs(),
                },
                spectral: sol.spectral,
                report: sol.report,
                warnings,
                validation,
            })
        }
        Model::Affine(m) => {
            let b = m.coefficient_matrix();
            let spectral = spectral_radius(b);
            if !spectral.is_subunit() {
                return Err(divergent(ModelKind::Affine, &spectral, spectral.rho));
            }
            let op = |v: &Vec<f64>| m.apply(v);
            let (x, report) =
                perov_iterate(&op, vec![0.0; m.dim()], &AbsDiffMetric { dim: m.dim() }, b, opts).map_err(unexpected)?;
            if validate.is_some() {
                warnings.push("no Monte Carlo check exists for affine models".into());
            }
            Ok(Solved {
                solution_csv: affine_solution_csv(&x).map_err(unexpected)?,
                solution: Solution::Affine {
                    dense_x: m.dense_fixed_point().map_err(unexpected)?,
                    x,
                },
                spectral,
                report,
                warnings,
                validation: None,
            })
        }
    }
}

pub fn solve(path: &Path, tol: Option<f64>, max_iter: usize, out: &Path, validate: Option<Validate>) -> Result<(), CliError> {
    let file = read_model(path)?;
    let kind = file.model.kind();
    let opts = options(kind, tol, max_iter)?;
    if let Some(v) = validate {
        if v.n_paths == 0 || v.horizon == 0 {
            return Err(CliError::Input("--validate needs at least one path and one period".into()));
        }
    }
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    let solved = match solve_model(&file.model, &opts, validate) {
        Ok(s) => s,
        Err(e) => {
            if let Some(doc) = e.document() {
                write(&out.join("divergence.json"), doc)?;
            }
            return Err(e);
        }
    };
    let mut warnings = solved.warnings;
    if !solved.report.converged() {
        warnings.push(format!(
            "iteration stopped without meeting the tolerance: {:?} after {} steps, error bound {:e}",
            solved.report.terminated, solved.report.iterations, solved.report.error_bound
        ));
    }
    let failed: Vec<String> = solved
        .validation
        .iter()
        .flatten()
        .filter(|e| !e.passed)
        .map(|e| e.label.clone())
        .collect();
    let result = RunResult {
        schema_version: perov::io::SCHEMA_VERSION,
        kind,
        model: file.metadata.clone(),
        spectral: solved.spectral,
        convergence: ConvergenceSummary::from(&solved.report),
        solution: solved.solution,
        warnings,
        validation: solved.validation,
    };
    let json = to_json(&result);
    write(&out.join("result.json"), &json)?;
    write(&out.join("solution.csv"), &solved.solution_csv)?;
    write(&out.join("convergence.csv"), &convergence_csv(&solved.report).map_err(unexpected)?)?;
    print!("{json}");
    if !failed.is_empty() {
        return Err(CliError::Verification(format!("Monte Carlo validation failed: {}", failed.join("; "))));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckDocument {
    kind: ModelKind,
    samples: usize,
    seed: u64,
    rho: f64,
    contraction: ContractionReport,
    blackwell: BlackwellReport,
    passed: bool,
}

fn run_checks<T: Operator<GridFunction>>(
    op: &T,
    b: &perov::NonnegativeMatrix,
    s: &CheckSamples,
) -> Result<(ContractionReport, BlackwellReport), CliError> {
    let contraction = verify_grid_contraction(op, b, &s.pairs).map_err(unexpected)?;
    let blackwell = blackwell_check(op, b, &s.ordered, &s.functions, &s.constants).map_err(unexpected)?;
    Ok((contraction, blackwell))
}

pub fn check(path: &Path, samples: usize, seed: u64) -> Result<(), CliError> {
    if samples == 0 {
        return Err(CliError::Input("--samples must be at least 1".into()));
    }
    let file = read_model(path)?;
    let mut rng = sampling::rng(seed);
    let (b, (contraction, blackwell)) = match &file.model {
        Model::Dp(m) => {
            let op = BellmanOperator::new(m);
            let s = sampling::dp_samples(&mut rng, m, samples);
            (op.coefficient_matrix().clone(), run_checks(&op, op.coefficient_matrix(), &s)?)
        }
        Model::Savings(m) => {
            let op = TimeIteration::new(m);
            let s = sampling::savings_samples(&mut rng, m, samples);
            (op.coefficient_matrix().clone(), run_checks(&op, op.coefficient_matrix(), &s)?)
        }
        Model::Affine(m) => {
            let n = m.dim();
            let scale = 10.0 * (1.0 + m.offset().iter().fold(0.0_f64, |acc, x| acc.max(x.abs())));
            let pairs = sampling::grid_pairs(&mut rng, samples, n, 1, scale);
            let functions: Vec<GridFunction> = pairs.iter().map(|(f, _)| f.clone()).collect();
            let ordered = sampling::ordered_pairs(&mut rng, &functions, scale);
            let constants = (0..samples.min(sampling::MAX_CONSTANTS)).map(|_| sampling::random_constants(&mut rng, n, scale)).collect();
            let s = CheckSamples {
                pairs,
                ordered,
                functions,
                constants,
            };
            (m.coefficient_matrix().clone(), run_checks(m, m.coefficient_matrix(), &s)?)
        }
        Model::Asset(_) => {
            return Err(CliError::Input("check supports dp, savings and affine models".into()));
        }
    };
    let passed = contraction.passed() && blackwell.passed();
    let doc = CheckDocument {
        kind: file.model.kind(),
        samples,
        seed,
        rho: spectral_radius(&b).rho,
        contraction,
        blackwell,
        passed,
    };
    print!("{}", to_json(&doc));
    if !passed {
        return Err(CliError::Verification(format!(
            "verification failed: {} contraction, {} monotonicity, {} discounting violations",
            doc.contraction.violations, doc.blackwell.monotonicity.violations, doc.blackwell.discounting.violations
        )));
    }
    Ok(())
}

pub struct SimulateArgs {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub state: usize,
    pub point: usize,
    pub wealth: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SimulationDocument {
    kind: ModelKind,
    config: SimulationConfig,
    state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wealth: Option<f64>,
    estimates: Vec<ValidationEntry>,
    passed: bool,
}

pub fn simulate(path: &Path, args: &SimulateArgs, out: Option<&Path>) -> Result<(), CliError> {
    let file = read_model(path)?;
    let kind = file.model.kind();
    let opts = options(kind, args.tol, 100_000)?;
    let config = SimulationConfig::new(args.seed, args.paths, args.horizon);
    let (point, wealth, estimates) = match &file.model {
        Model::Dp(m) => {
            if args.state >= m.states() || args.point >= m.x_grid().len() {
                return Err(CliError::Input("--state or --point out of range".into()));
            }
            let sol = solve_dp_from(m, GridFunction::zeros(m.states(), m.x_grid().len()), &opts).map_err(dp_error)?;
            let policy = greedy_policy(m, &sol.value).map_err(unexpected)?;
            let target = policy_value(m, &policy, opts.tol).map_err(dp_error)?.get(args.state, args.point);
            let estimate = simulate_dp_value(m, &policy, args.state, args.point, &config).map_err(sim_err)?;
            let entry = ValidationEntry {
                label: "greedy policy".into(),
                passed: estimate.brackets(target),
                estimate,
                target: Some(target),
            };
            (Some(args.point), None, vec![entry])
        }
        Model::Asset(m) => {
            if args.state >= m.states() {
                return Err(CliError::Input("--state out of range".into()));
            }
            let v = asset_finite(m)?;
            let estimate = simulate_pd_ratio(m, args.state, &config).map_err(sim_err)?;
            let entry = ValidationEntry {
                label: "price-dividend ratio".into(),
                passed: estimate.brackets(v[args.state]),
                estimate,
                target: Some(v[args.state]),
            };
            (None, None, vec![entry])
        }
        Model::Savings(m) => {
            if args.state >= m.states() {
                return Err(CliError::Input("--state out of range".into()));
            }
            let a0 = args.wealth.unwrap_or_else(|| median_wealth(m));
            let sol = solve_savings(m, &opts).map_err(savings_error)?;
            let entries = savings_validation(m, &sol.consumption, args.state, a0, &config)?;
            (None, Some(a0), entries)
        }
        Model::Affine(_) => {
            return Err(CliError::Input("simulate supports dp, asset and savings models".into()));
        }
    };
    let passed = estimates.iter().all(|e| e.passed);
    let doc = SimulationDocument {
        kind,
        config,
        state: args.state,
        point,
        wealth,
        estimates,
        passed,
    };
    let json = to_json(&doc);
    if let Some(out) = out {
        write(out, &json)?;
    }
    print!("{json}");
    if !passed {
        return Err(CliError::Verification("Monte Carlo estimate failed its check".into()));
    }
    Ok(())
}
