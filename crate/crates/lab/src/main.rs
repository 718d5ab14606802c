use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;

use oseledets_lab::config::ExperimentConfig;
use oseledets_lab::runner::{self, Kind};
use oseledets_lab::LabError;

/// Numerical laboratory experiment runner.
#[derive(Parser)]
#[command(name = "lab", version, about)]
struct Cli {
    /// Experiment kind: lyapunov | regularity | entropy | lp-test |
    /// perron-demo | certify-b | smooth-majorant | report
    kind: String,
    /// Path to the TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured worker count
    #[arg(long)]
    workers: Option<usize>,
    /// Override the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), LabError> {
    let kind = Kind::from_str(&cli.kind)?;
    let (mut cfg, config_bytes) = ExperimentConfig::from_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(LabError::Config("--workers: must be positive".into()));
        }
        cfg.run.workers = workers;
    }
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.run.out));
    runner::run(kind, &cfg, &config_bytes, &out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
