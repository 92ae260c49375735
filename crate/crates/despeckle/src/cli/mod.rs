//! Command-line surface: `simulate`, `train`, `despeckle`, `evaluate`,
//! `efficiency`. Every command is driven by a plain-text config file; the
//! `--seed` flag overrides the config seed and `--out` picks the output
//! directory. Exit codes: 0 success, 2 configuration error, 3 numeric
//! failure.

mod despeckle_cmd;
mod efficiency_cmd;
mod evaluate;
mod simulate;
mod train_cmd;

use crate::io::RunConfig;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "despeckle",
    version,
    about = "Self-supervised SAR despeckling: simulation, training, inference and metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Plain-text key=value configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate clean scenes, noisy instances and simulated time series.
    Simulate(CommonArgs),
    /// Train one phase (A, B or C) of the pipeline.
    Train(CommonArgs),
    /// Restore an intensity image with a trained checkpoint.
    Despeckle(CommonArgs),
    /// Compute PSNR / ENL / Wasserstein metrics.
    Evaluate(CommonArgs),
    /// Estimator-efficiency experiment (RMSE vs sample count).
    Efficiency(CommonArgs),
}

/// Seed resolution: the --seed flag wins over the config key.
fn effective_seed(cfg: &RunConfig, flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    cfg.require_parsed::<u64>("seed")
        .map_err(|_| Error::Config("a seed is required (config key 'seed' or --seed)".to_string()))
}

fn load_config(args: &CommonArgs) -> Result<(RunConfig, u64)> {
    let cfg = RunConfig::load(&args.config)?;
    let seed = effective_seed(&cfg, args.seed)?;
    Ok((cfg, seed))
}

/// `.s2s1` files in a directory, sorted by file name.
fn list_images_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "s2s1").unwrap_or(false))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Train(args) => train_cmd::run(&args),
        Command::Despeckle(args) => despeckle_cmd::run(&args),
        Command::Evaluate(args) => evaluate::run(&args),
        Command::Efficiency(args) => efficiency_cmd::run(&args),
    }
}
