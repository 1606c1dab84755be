//! `hqtn`: dataset generation, training, search, replay and reports.

mod commands;
mod config;
mod error;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hqtn::exec::{init_workers, ExecMode};

use crate::error::{CliError, CliResult};

/// Worker threads for batch evaluation (defaults to all cores).
const WORKERS_ENV: &str = "HQTN_WORKERS";

#[derive(Parser)]
#[command(
    name = "hqtn",
    version,
    about = "Hybrid quantum tensor-network flutter models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the parameter sweep and write a dataset file.
    Datagen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the training split and score on the test split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `experiment.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Random hyperparameter search with cross-validation (resumable).
    Hpo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the stored test metrics of a training run.
    Eval {
        #[arg(long)]
        run: PathBuf,
    },
    /// Emit CSV tables and a summary for a training run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn workers() -> CliResult<()> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
                CliError::Validation(format!(
                    "{WORKERS_ENV} must be a positive integer, got {v:?}"
                ))
            })?;
            init_workers(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    workers()?;
    let mode = ExecMode::Parallel;
    match cli.command {
        Command::Datagen { config, out } => commands::datagen(config.as_deref(), &out, mode),
        Command::Train {
            config,
            dataset,
            out,
            seed,
        } => commands::train(&config, &dataset, &out, seed, mode),
        Command::Hpo {
            config,
            dataset,
            budget,
            out,
        } => commands::hpo(&config, &dataset, budget, &out, mode),
        Command::Eval { run } => commands::eval(&run, mode),
        Command::Report { run } => commands::report(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
