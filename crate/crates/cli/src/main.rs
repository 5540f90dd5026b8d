//! Command-line front end for the photonic network toolkit.
//!
//! Exit codes: 0 on success, 1 for invalid inputs or configs, 2 when a
//! verification check fails, 3 when numerics break down.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod config;
mod store;

use config::ExperimentConfig;
use store::ResultStore;

#[derive(Parser)]
#[command(name = "qpnn", version, about = "Simulate, schedule, and train time-bin photonic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Input file: a JSON config, or the unitary/plan for decompose/schedule.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a unitary (JSON re/im grids) into a rectangular crossing mesh
    Decompose,
    /// Compile a mesh plan into a two-loop control program and verify it
    Schedule {
        /// Idle bins between consecutive layers.
        #[arg(long, default_value_t = 0)]
        buffer: usize,
    },
    /// Train network parameters over random restarts
    Train,
    /// Evaluate a network on its task across source visibilities
    Evaluate,
    /// Sweep coincidence-time filters on a trained sorter model
    FilterScan,
    /// Map detector jitter to mean pairwise visibility
    VisibilitySweep,
    /// Scale a loss budget until a network shape hits a target loss
    CalibrateLoss,
}

/// Failure classes, one per non-zero exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input, config, or file: exit 1.
    Validation(String),
    /// A verification check did not pass: exit 2.
    Verification(String),
    /// Numerics broke down: exit 3.
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Validation(m) => format!("error: {m}"),
            CliError::Verification(m) => format!("verification failure: {m}"),
            CliError::Numerical(m) => format!("numerical failure: {m}"),
        }
    }
}

impl From<qpnn_core::Error> for CliError {
    fn from(e: qpnn_core::Error) -> Self {
        match e {
            qpnn_core::Error::InvalidInput(m) => CliError::Validation(m),
            qpnn_core::Error::Numerical(m) => CliError::Numerical(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let store = ResultStore::create(&cli.out)?;

    match cli.command {
        Command::Decompose => commands::cmd_decompose(&config_path, &store),
        Command::Schedule { buffer } => commands::cmd_schedule(&config_path, buffer, &store),
        Command::Train => {
            let (cfg, text) = ExperimentConfig::load(&config_path)?;
            commands::cmd_train(&cfg, &text, cli.seed, &store)
        }
        Command::Evaluate => {
            let (cfg, text) = ExperimentConfig::load(&config_path)?;
            commands::cmd_evaluate(&cfg, &text, &store)
        }
        Command::FilterScan => {
            let (cfg, text) = ExperimentConfig::load(&config_path)?;
            commands::cmd_filter_scan(&cfg, &text, &store)
        }
        Command::VisibilitySweep => {
            let (cfg, text) = ExperimentConfig::load(&config_path)?;
            commands::cmd_visibility_sweep(&cfg, &text, cli.seed, &store)
        }
        Command::CalibrateLoss => {
            let (cfg, text) = ExperimentConfig::load(&config_path)?;
            commands::cmd_calibrate_loss(&cfg, &text, &store)
        }
    }
}
