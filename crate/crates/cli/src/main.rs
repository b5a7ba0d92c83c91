use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinn_cli::commands::{cmd_cv, cmd_predict, cmd_rates, cmd_simulate, cmd_sweep, cmd_train};
use spinn_cli::config::{PredictConfig, RatesConfig, RunConfig, SimulateConfig, SweepConfig};
use spinn_cli::data::read_json;
use spinn_cli::{CliError, Result};

/// Sparse-input neural networks: fitting, cross-validation and simulations.
#[derive(Debug, Parser)]
#[command(name = "spinn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one network with a fixed penalty.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cross-validate a hyper-parameter grid and refit the best cell.
    Cv {
        #[arg(long)]
        config: PathBuf,
    },
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// The last column of the data is a response and is ignored.
        #[arg(long)]
        has_response: bool,
    },
    /// Write simulated train and test sets.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a convergence-rate experiment.
    Rates {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep lasso and group lasso weights on one simulated dataset.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn base_dir(path: &std::path::Path) -> PathBuf {
    path.parent().map(|p| p.to_path_buf()).unwrap_or_default()
}

fn absolute(base: &std::path::Path, path: &std::path::Path) -> Result<PathBuf> {
    let joined = base.join(path);
    std::path::absolute(&joined).map_err(|e| CliError::io(&joined, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config } => {
            let out = cmd_train(&RunConfig::load(&config)?)?;
            println!(
                "objective {:.6e}, {} iterations, selected features {:?}",
                out.metrics.final_objective, out.metrics.n_iters, out.metrics.selected_features
            );
        }
        Command::Cv { config } => {
            let out = cmd_cv(&RunConfig::load(&config)?)?;
            let s = &out.summary;
            println!(
                "best lambda {} alpha {} hidden {:?}: mean loss {:.6e} (se {:.2e}); selected features {:?}",
                s.best_lambda, s.best_alpha, s.best_hidden, s.best_mean_loss, s.best_standard_error,
                out.model.selected_features
            );
        }
        Command::Predict {
            model,
            data,
            out,
            has_response,
        } => {
            let cfg = PredictConfig {
                model: std::path::absolute(&model).map_err(|e| CliError::io(&model, e))?,
                data: std::path::absolute(&data).map_err(|e| CliError::io(&data, e))?,
                out: std::path::absolute(&out).map_err(|e| CliError::io(&out, e))?,
                has_response,
            };
            let preds = cmd_predict(&cfg)?;
            println!("wrote {} predictions to {}", preds.len(), cfg.out.display());
        }
        Command::Simulate { config } => {
            let mut cfg: SimulateConfig = read_json(&config)?;
            cfg.output_dir = absolute(&base_dir(&config), &cfg.output_dir)?;
            let meta = cmd_simulate(&cfg)?;
            println!("{}: sigma {:.6}, wrote {}", meta.scenario, meta.sigma, cfg.output_dir.display());
        }
        Command::Rates { config } => {
            let mut cfg: RatesConfig = read_json(&config)?;
            cfg.output_dir = absolute(&base_dir(&config), &cfg.output_dir)?;
            let result = cmd_rates(&cfg)?;
            for f in &result.fits {
                println!("{} ~ {}: slope {:?}", f.response, f.regressors.join(" + "), &f.fit.coefficients[1..]);
            }
            println!("max/min excess ratio {:.3}", result.excess_max_min_ratio);
        }
        Command::Sweep { config } => {
            let mut cfg: SweepConfig = read_json(&config)?;
            cfg.output_dir = absolute(&base_dir(&config), &cfg.output_dir)?;
            let cells = cmd_sweep(&cfg)?;
            println!("{} cells written to {}", cells.len(), cfg.output_dir.display());
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("SPINN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("SPINN_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
