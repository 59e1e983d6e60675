mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ckmc::Error),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                ckmc::Error::Invariant(_) | ckmc::Error::Integration(_) | ckmc::Error::Merge(_),
            ) => 3,
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Io(..) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ckmc",
    version,
    about = "Coupled finite-difference sensitivity estimation for lattice KMC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the finite difference for every scheme in [coupling] schemes.
    Run { config: PathBuf },
    /// Variance ratio against the uncoupled pair for every q in [coupling] q.
    SweepQ { config: PathBuf },
    /// Median wall-clock per scheme and per q relative to the uncoupled pair.
    Bench { config: PathBuf },
    /// Compare Monte Carlo estimates with exact master-equation solutions.
    OracleCheck { config: PathBuf },
}

fn load(path: &Path) -> Result<(config::Experiment, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let exp = ExperimentConfig::parse(&text)?.validate()?;
    Ok((exp, text))
}

fn dispatch(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::Run { config } => {
            let (exp, text) = load(&config)?;
            commands::run(&exp, &text).map(|_| true)
        }
        Command::SweepQ { config } => {
            let (exp, text) = load(&config)?;
            commands::sweep_q(&exp, &text).map(|_| true)
        }
        Command::Bench { config } => {
            let (exp, text) = load(&config)?;
            commands::bench(&exp, &text).map(|_| true)
        }
        Command::OracleCheck { config } => {
            let (exp, text) = load(&config)?;
            commands::oracle_check(&exp, &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("oracle check: some rows failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
