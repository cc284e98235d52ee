//! `pantswalk` command-line front end.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use pantswalk::families::FamilyError;
use pantswalk::laminate::LaminateError;
use pantswalk::solver::{ConvergenceVerdict, SolverError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("solver: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Hypothesis(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        match e {
            FamilyError::BudgetViolation { .. } => CliError::Hypothesis(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::HypothesisNotMet { .. } => CliError::Hypothesis(e.to_string()),
            SolverError::Family(f) => f.into(),
            SolverError::InvalidParameter(_) => CliError::Config(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<LaminateError> for CliError {
    fn from(e: LaminateError) -> Self {
        match e {
            LaminateError::Solver(s) => s.into(),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pantswalk",
    version,
    about = "Type problem experiments on pants-decomposition graphs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the Monte Carlo seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Zero timings and omit timestamps so reruns are byte-identical.
    #[arg(long, global = true)]
    pub reproducible: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the family and write its network as JSON.
    Build,
    /// Solve the truncation at every configured radius and write a CSV.
    Sweep,
    /// Check hypotheses and write a certificate.
    Certify {
        /// Whether `Σ 1/ψ(n)` diverges; defaults to the config's `series`.
        #[arg(long)]
        series: Option<ConvergenceVerdict>,
    },
    /// Draw a CSV column as an SVG line chart.
    Plot {
        /// Input CSV; defaults to the sweep output.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Column for the horizontal axis; defaults to the first column.
        #[arg(long)]
        x: Option<String>,
        /// Column for the vertical axis; defaults to `R_N`, else the second column.
        #[arg(long)]
        y: Option<String>,
    },
    /// Series-parallel reduction of a truncation, with the resistance before and after.
    Reduce {
        #[arg(long)]
        radius: Option<u32>,
    },
    /// Flow, train track and summability functional at one radius.
    Lamination {
        #[arg(long)]
        radius: Option<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
