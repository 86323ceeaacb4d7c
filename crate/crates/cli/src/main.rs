//! `dicca` command-line interface.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid configuration,
//! 3 unreadable data, 4 training diverged, 5 shape mismatch.

mod commands;
mod config;
mod error;
mod heatmap;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EvalArgs, FitArgs, Mnist2ViewArgs, SimulateArgs, TransformArgs};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "dicca", version, about = "Sparse deep variational CCA with shared and view-specific latents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset from the [simulate] section of a config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the rotated / noisy two-view dataset from MNIST idx files.
    Mnist2view {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only the first n images.
        #[arg(long)]
        subset: Option<usize>,
        #[arg(long, default_value_t = 45.0)]
        max_angle_deg: f64,
        /// Upper end of the uniform pixel noise on the second view.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Train a model and write model.dicca, report.json and the resolved config.
    Fit {
        /// Dataset manifest; overrides [data].manifest.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Shared-only model: no view-specific latents.
        #[arg(long)]
        disable_private: bool,
        /// Switch the group-lasso shrinkage off.
        #[arg(long)]
        lambda_zero: bool,
    },
    /// Score a trained model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated: mse, r2, heatmap, support.
        #[arg(long, default_value = "mse,r2,heatmap")]
        metrics: String,
        /// truth.json written by `simulate`; needed for the support metric.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write posterior means of the shared or one view's private latents as CSV.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `shared` or `private:<view>` (views counted from 1).
        #[arg(long, default_value = "shared")]
        which: String,
    },
}

/// Computation is single-threaded; the variable is validated so a typo does
/// not pass silently.
fn check_threads() -> CliResult<()> {
    match std::env::var("DICCA_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Ok(v) if v.trim().parse::<usize>().is_ok_and(|n| n >= 1) => Ok(()),
        Ok(v) => Err(CliError::Config(format!("DICCA_THREADS={v:?}: expected a positive integer"))),
        Err(e) => Err(CliError::Config(format!("DICCA_THREADS: {e}"))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    check_threads()?;
    match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&SimulateArgs { config, out, seed }),
        Command::Mnist2view { images, labels, out, seed, subset, max_angle_deg, noise } => {
            commands::mnist2view(&Mnist2ViewArgs { images, labels, out, seed, subset, max_angle_deg, noise })
        }
        Command::Fit { data, config, out, seed, epochs, lambda, disable_private, lambda_zero } => {
            commands::fit(&FitArgs { data, config, out, seed, epochs, lambda, disable_private, lambda_zero })
        }
        Command::Eval { model, data, metrics, truth, out } => {
            commands::eval(&EvalArgs { model, data, metrics, truth, out })
        }
        Command::Transform { model, data, out, which } => {
            commands::transform(&TransformArgs { model, data, out, which })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
