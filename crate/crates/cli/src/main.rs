//! `redimlab` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{CommonArgs, RunConfig, OUT_ENV};

#[derive(Debug, Parser)]
#[command(name = "redimlab", version, about = "Slow invariant manifolds of reaction-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fast/slow decomposition of the linearised model.
    Gql {
        /// Number of fast directions (automatic gap detection when omitted for linear-test).
        #[arg(long = "fast-dim")]
        fast_dim: Option<usize>,
    },
    /// Stationary profile (mm) or heat solution (heat-test).
    Simulate {
        /// Keep every k-th step in the snapshot file.
        #[arg(long = "snapshot-every", default_value_t = 1)]
        snapshot_every: usize,
    },
    /// Invariance residuals along the stationary profile.
    Residuals,
    /// Both scenarios for each ε, run in parallel.
    Sweep {
        /// Comma-separated ε values (default: the GQL estimate).
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Full self-check with a pass/fail summary.
    Validate {
        /// Perturb the printed transform to exercise the failure path.
        #[arg(long = "corrupt-transform")]
        corrupt_transform: bool,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let cfg = RunConfig::resolve(&cli.common, env_out).map_err(|e| Failure::Config(e.0))?;
    match cli.command {
        Command::Gql { fast_dim } => commands::gql(&cfg, fast_dim),
        Command::Simulate { snapshot_every } => commands::simulate(&cfg, snapshot_every),
        Command::Residuals => commands::residuals(&cfg),
        Command::Sweep { epsilons, workers } => commands::sweep(&cfg, &epsilons, workers),
        Command::Validate { corrupt_transform } => commands::validate(&cfg, corrupt_transform),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
