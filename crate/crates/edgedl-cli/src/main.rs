use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use edgedl::experiments::{parse_config, run, Command, ExperimentConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    SweepK,
    Bounds,
    OptimalK,
    OmaNoma,
    Train,
    Planner,
    Centralized,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::SweepK => Command::SweepK,
            Sub::Bounds => Command::Bounds,
            Sub::OptimalK => Command::OptimalK,
            Sub::OmaNoma => Command::OmaNoma,
            Sub::Train => Command::Train,
            Sub::Planner => Command::Planner,
            Sub::Centralized => Command::Centralized,
        }
    }
}

/// Completion-time sweeps, device planning and CoCoA training for wireless
/// distributed edge learning. Output is CSV.
#[derive(Debug, Parser)]
#[command(name = "edgedl", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// `key = value` config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; overrides the config. Standard output if neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset for `train`; overrides the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match go(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("edgedl: {e}");
            ExitCode::FAILURE
        }
    }
}

fn go(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.dataset {
        cfg.dataset = Some(d);
    }
    if let Some(o) = cli.out {
        cfg.output = Some(o);
    }
    let csv = run(cli.command.into(), &cfg)?;
    match &cfg.output {
        Some(p) => std::fs::write(p, csv).map_err(|e| format!("cannot write {}: {e}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
