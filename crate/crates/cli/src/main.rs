//! `photoent`: tabulates count statistics, entanglement scans, oracle
//! cross-checks and probe reconstructions from a JSON experiment file.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "photoent", version, about = "Photocount-conditioned entanglement of two bosonic modes")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for sampling commands; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Probe: use exact moments of the configured state instead of records.
    #[arg(long, global = true)]
    analytic: bool,
    /// Probe: raw-moment estimates valid only for gamma t >> 1.
    #[arg(long, global = true)]
    compat_asymptotic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// P(k, t) for an instantaneous projection of the monitor.
    PmDist,
    /// P(k, t) under continuous counting, with most probable times.
    CountDist,
    /// Entanglement of the k-count state at its most probable time.
    Scan,
    /// Closed forms against the three-mode oracle.
    OracleCheck,
    /// Moments, H(x), C(j) and state classification.
    Probe,
    /// Seeded synthetic count records.
    Sample,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data; exit code 2.
    Input(String),
    /// Failure writing results; exit code 3.
    Output(String),
    Core(photoent::Error),
}

impl From<photoent::Error> for CliError {
    fn from(e: photoent::Error) -> Self {
        Self::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use photoent::Error as E;
        match self {
            Self::Input(_) => 2,
            Self::Output(_) => 3,
            Self::Core(E::InvalidInput(_) | E::OutcomeImpossible { .. } | E::Degenerate(_)) => 2,
            Self::Core(E::Resource(_) | E::Convergence { .. } | E::NoInteriorMaximum { .. }) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Output(m) => write!(f, "output error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("photoent: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
