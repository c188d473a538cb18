//! `perov`: spectral diagnostics, solvers, contraction checks and Monte Carlo
//! validation for model files.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 input error, 3 divergence
//! (spectral radius at least one), 4 verification failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "perov", version, about = "Generalized contraction solvers for Markov-modulated models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral radius, sup norm and Gelfand table of a nonnegative matrix.
    Spectral {
        /// JSON file holding an array of rows or {"matrix": [...]}.
        matrix: PathBuf,
    },
    /// Solve a model and write result.json, solution.csv and convergence.csv.
    Solve {
        /// Model file; see schema/model.schema.json.
        model: PathBuf,
        /// Certified error bound at which iteration stops (default 1e-10,
        /// 1e-6 for savings models, in marginal-utility units).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Run the matching Monte Carlo check.
        #[arg(long, num_args = 3, value_names = ["N_PATHS", "HORIZON", "SEED"])]
        validate: Option<Vec<u64>>,
    },
    /// Sample-based Blackwell and contraction checks of the model operator.
    Check {
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo estimate for a solved model.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial exogenous state.
        #[arg(long, default_value_t = 0)]
        state: usize,
        /// Initial grid point index (dp models).
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Initial wealth (savings models; default is the median grid point).
        #[arg(long)]
        wealth: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Also write the estimate document to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PEROV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("PEROV_THREADS must be a nonnegative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Unexpected(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Spectral { matrix } => commands::spectral(&matrix),
        Command::Solve {
            model,
            tol,
            max_iter,
            out,
            validate,
        } => {
            let validate = validate.map(|v| commands::Validate {
                n_paths: v[0] as usize,
                horizon: v[1] as usize,
                seed: v[2],
            });
            commands::solve(&model, tol, max_iter, &out, validate)
        }
        Command::Check { model, samples, seed } => commands::check(&model, samples, seed),
        Command::Simulate {
            model,
            paths,
            horizon,
            seed,
            state,
            point,
            wealth,
            tol,
            out,
        } => commands::simulate(
            &model,
            &commands::SimulateArgs {
                paths,
                horizon,
                seed,
                state,
                point,
                wealth,
                tol,
            },
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(doc) = e.document() {
                print!("{doc}");
            }
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
