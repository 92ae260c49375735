//! `efficiency`: RMSE of the two M-estimators as a function of sample count,
//! written as CSV.

use super::CommonArgs;
use crate::efficiency::{run_efficiency_experiment, DEFAULT_SAMPLE_COUNTS};
use crate::io::Manifest;
use crate::rng::Rng;
use crate::speckle::LooksCount;
use crate::{Error, Result};

const KEYS: &[&str] = &["seed", "x_true", "looks", "sample_counts", "trials"];

pub fn run(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = super::load_config(args)?;
    cfg.restrict(KEYS)?;
    let x_true = cfg.get_parsed("x_true", 0.0)?;
    let looks = LooksCount::new(cfg.get_parsed("looks", 1.0)?)?;
    let counts = cfg.get_usize_list("sample_counts", &DEFAULT_SAMPLE_COUNTS)?;
    let trials = cfg.get_parsed("trials", 10_000usize)?;
    let mut rng = Rng::new(seed);
    let curve = run_efficiency_experiment(x_true, looks, &counts, trials, &mut rng)?;

    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join("efficiency.csv");
    let mut buf = Vec::new();
    curve
        .write_csv(&mut buf)
        .map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&csv_path, buf).map_err(|e| Error::io(&csv_path, e))?;
    let mut manifest = Manifest::new("efficiency", seed, cfg.hash());
    manifest.push(&csv_path, out);
    manifest.write(out)?;
    println!(
        "efficiency: {} sample counts x {} trials -> {}",
        curve.sample_counts.len(),
        trials,
        csv_path.display()
    );
    Ok(())
}
