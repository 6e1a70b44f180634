//! `reachavoid` command-line front end.
//!
//! Exit codes: 0 success, 1 a result missed its threshold, 2 configuration
//! or input error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reachavoid::analysis::AnalysisError;
use reachavoid::games::GameError;
use reachavoid::grid::format::FormatError;
use reachavoid::grid::GridError;
use reachavoid::solver::SolveError;
use reachavoid::strategy::StrategyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("threshold not met: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Threshold(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::NonFinite { .. } | SolveError::ZeroStep { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Solve(s) => s.into(),
            AnalysisError::NoZeroSet => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

macro_rules! config_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Config(e.to_string())
            }
        }
    )*};
}

config_error!(GameError, GridError, FormatError, StrategyError, std::io::Error, serde_json::Error);

#[derive(Debug, Parser)]
#[command(name = "reachavoid", version, about = "Reach-avoid sets for time-varying differential games")]
struct Cli {
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for Monte-Carlo sampling (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Smaller grids for a fast run.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem and write every frame plus a manifest.
    Solve { config: PathBuf },
    /// Boundary-error convergence study for example1.
    Converge { config: Option<PathBuf> },
    /// Native versus time-augmented solve: timing and set agreement.
    Benchmark { config: Option<PathBuf> },
    /// Closed-loop simulations from a solve directory.
    Simulate { config: PathBuf },
    /// Level-set contour of a stored frame as CSV.
    Contour {
        frame: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        level: f64,
        /// Pin a coordinate before contouring, as `DIM=VALUE`.
        #[arg(long = "slice", value_parser = parse_slice)]
        slices: Vec<(usize, f64)>,
    },
}

fn parse_slice(s: &str) -> Result<(usize, f64), String> {
    let (d, v) = s.split_once('=').ok_or("expected DIM=VALUE")?;
    let d = d.trim().parse().map_err(|e| format!("bad dimension: {e}"))?;
    let v = v.trim().parse().map_err(|e| format!("bad value: {e}"))?;
    Ok((d, v))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let common = commands::Common {
        out: cli.out,
        seed: cli.seed,
        quick: cli.quick,
    };
    match cli.command {
        Command::Solve { config } => commands::solve(&config::RunConfig::load(&config)?, &common),
        Command::Converge { config } => {
            let cfg = match config {
                Some(p) => config::RunConfig::load(&p)?,
                None => config::RunConfig::builtin("example1"),
            };
            commands::converge(&cfg, &common)
        }
        Command::Benchmark { config } => {
            let cfg = match config {
                Some(p) => config::RunConfig::load(&p)?,
                None => config::RunConfig::builtin("example2"),
            };
            commands::benchmark(&cfg, &common)
        }
        Command::Simulate { config } => commands::simulate(&config::RunConfig::load(&config)?, &common),
        Command::Contour { frame, level, slices } => commands::contour(&frame, level, &slices, &common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reachavoid: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
