//! `simulate`: write clean reflectivity scenes, noisy instances and
//! (optionally) simulated time series with ground-truth change masks.
//!
//! Output layout: `clean/clean_NNN.s2s1`, `noisy/noisy_NNN_KK.s2s1`,
//! `series/seriesNNN_dateDDD.s2s1` plus `series_truth/` and `series_mask/`
//! for the simulator ground truth.

use super::CommonArgs;
use crate::image::{Domain, Image};
use crate::io::{image_file, pgm, Manifest, RunConfig};
use crate::pipeline::{simulate_time_series, synth_reflectivity, ChangeModel};
use crate::rng::Rng;
use crate::speckle::{corrupt, Kernel, LooksCount};
use crate::{Error, Result};
use std::path::Path;

const KEYS: &[&str] = &[
    "seed",
    "width",
    "height",
    "images",
    "looks",
    "instances",
    "dates",
    "change_fraction",
    "change_min_factor",
    "change_max_factor",
    "kernel",
    "preview",
];

/// Parse "none" or "gaussian:SIZE:SIGMA".
fn parse_kernel(spec: &str) -> Result<Option<Kernel>> {
    if spec == "none" {
        return Ok(None);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 && parts[0] == "gaussian" {
        let size: usize = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad kernel size '{}'", parts[1])))?;
        let sigma: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad kernel sigma '{}'", parts[2])))?;
        return Ok(Some(Kernel::gaussian(size, sigma)?));
    }
    Err(Error::Config(format!(
        "unknown kernel spec '{spec}' (expected none or gaussian:SIZE:SIGMA)"
    )))
}

struct Plan {
    width: usize,
    height: usize,
    images: usize,
    looks: LooksCount,
    instances: usize,
    dates: usize,
    change: ChangeModel,
    kernel: Option<Kernel>,
    preview: bool,
}

fn plan(cfg: &RunConfig) -> Result<Plan> {
    cfg.restrict(KEYS)?;
    let width = cfg.get_parsed("width", 256usize)?;
    let height = cfg.get_parsed("height", 256usize)?;
    let images = cfg.get_parsed("images", 8usize)?;
    if width == 0 || height == 0 || images == 0 {
        return Err(Error::Config(
            "width, height and images must be positive".to_string(),
        ));
    }
    let looks = LooksCount::new(cfg.get_parsed("looks", 1.0)?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let instances = cfg.get_parsed("instances", 1usize)?;
    let dates = cfg.get_parsed("dates", 0usize)?;
    if dates == 1 {
        return Err(Error::Config(
            "dates must be 0 (no series) or >= 2".to_string(),
        ));
    }
    let fraction = cfg.get_parsed("change_fraction", 0.1)?;
    if !(0.0..=0.9).contains(&fraction) {
        return Err(Error::Config(format!(
            "change_fraction must lie in [0, 0.9], got {fraction}"
        )));
    }
    let change = if fraction == 0.0 {
        ChangeModel::None
    } else {
        ChangeModel::Regions {
            fraction,
            min_factor: cfg.get_parsed("change_min_factor", 0.25)?,
            max_factor: cfg.get_parsed("change_max_factor", 4.0)?,
        }
    };
    let kernel = parse_kernel(cfg.get("kernel").unwrap_or("none"))?;
    Ok(Plan {
        width,
        height,
        images,
        looks,
        instances,
        dates,
        change,
        kernel,
        preview: cfg.get_bool("preview", false)?,
    })
}

fn write(
    manifest: &mut Manifest,
    out_dir: &Path,
    rel: &str,
    img: &Image,
    preview: bool,
) -> Result<()> {
    let path = out_dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    image_file::write_image(&path, img)?;
    manifest.push(&path, out_dir);
    if preview {
        let ppath = path.with_extension("pgm");
        pgm::write_pgm(&ppath, img, 0.01, 0.99)?;
        manifest.push(&ppath, out_dir);
    }
    Ok(())
}

pub fn run(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = super::load_config(args)?;
    let plan = plan(&cfg)?;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut manifest = Manifest::new("simulate", seed, cfg.hash());

    for i in 0..plan.images {
        let mut rng = Rng::substream(seed, 0x5100_0000 + i as u64);
        let clean = synth_reflectivity(plan.width, plan.height, &mut rng)?;
        write(
            &mut manifest,
            out,
            &format!("clean/clean_{i:03}.s2s1"),
            &clean,
            plan.preview,
        )?;
        for k in 0..plan.instances {
            let noisy = corrupt(&clean, plan.looks, &mut rng, plan.kernel.as_ref())?;
            write(
                &mut manifest,
                out,
                &format!("noisy/noisy_{i:03}_{k:02}.s2s1"),
                &noisy,
                plan.preview,
            )?;
        }
        if plan.dates >= 2 {
            let series = simulate_time_series(
                &clean,
                plan.dates,
                plan.looks,
                &plan.change,
                plan.kernel.as_ref(),
                &mut rng,
            )?;
            for d in 0..series.dates() {
                write(
                    &mut manifest,
                    out,
                    &format!("series/series{i:03}_date{d:03}.s2s1"),
                    series.frame(d),
                    plan.preview,
                )?;
                write(
                    &mut manifest,
                    out,
                    &format!("series_truth/series{i:03}_date{d:03}_truth.s2s1"),
                    series.truth(d).expect("simulated series has truths"),
                    false,
                )?;
                let mask = series.change_mask(d).expect("simulated series has masks");
                let mask_img = Image::new(
                    plan.width,
                    plan.height,
                    Domain::Reflectivity,
                    mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
                )?;
                write(
                    &mut manifest,
                    out,
                    &format!("series_mask/series{i:03}_date{d:03}_mask.s2s1"),
                    &mask_img,
                    false,
                )?;
            }
        }
    }
    manifest.write(out)?;
    println!(
        "simulate: wrote {} artifacts to {}",
        manifest.artifacts.len() + 1,
        out.display()
    );
    Ok(())
}
