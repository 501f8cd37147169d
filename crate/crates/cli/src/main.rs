//! `setinv`: validate, solve, certify and simulate a set-invariance problem
//! described by a JSON run configuration.
//!
//! Exit codes: 0 success or certified, 1 validation failure, 2 usage or I/O
//! error, 3 falsified.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Falsified(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Falsified(_) => 3,
        }
    }
}

impl From<setinv::Error> for CliError {
    fn from(e: setinv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "setinv",
    version,
    about = "Certify and simulate almost-sure controlled set invariance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the Monte Carlo stage of this command (Feynman-Kac for `solve`,
    /// the closed loop for `simulate`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Store every k-th simulation step.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Accept WARN entries in validation.
    #[arg(long, global = true)]
    allow_warn: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check the problem against the standing assumptions.
    Validate,
    /// Compute h_T on a space-time grid, or the principal eigenpair.
    Solve,
    /// Range test of the score against the input matrix.
    Certify,
    /// Closed-loop Euler-Maruyama paths and exit statistics.
    Simulate,
    /// Bundle the artifacts of the output directory into one summary.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let c = &cli.common;
    if let Some(k) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if let Some(k) = c.stride {
        cfg.simulation.stride = Some(k);
    }
    match cli.command {
        Command::Validate => commands::validate(&cfg, c.allow_warn),
        Command::Solve => {
            if let (Some(seed), Some(mc)) = (c.seed, cfg.feynman_kac.as_mut()) {
                mc.seed = seed;
            }
            commands::solve(&cfg)
        }
        Command::Certify => commands::certify(&cfg),
        Command::Simulate => {
            if let Some(seed) = c.seed {
                cfg.simulation.seed = seed;
            }
            commands::simulate(&cfg)
        }
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Validation(m) => eprintln!("validation failed: {m}"),
                CliError::Falsified(m) => eprintln!("falsified: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
