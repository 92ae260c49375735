//! `evaluate`: metric rows as CSV (`image,metric,value,sigma`).
//!
//! Two modes. Direct mode compares a given estimate file against the
//! reference. Protocol mode takes a checkpoint, generates `instances` noisy
//! realizations of the reference scene, restores each and reports
//! mean +- 1 sigma, together with the noisy-input baseline.

use super::CommonArgs;
use crate::eval::{enl, mean_sigma, psnr_amplitude, to_amplitude, wasserstein_residual, Region};
use crate::image::{Domain, Image};
use crate::io::{image_file, Manifest, RunConfig};
use crate::nn::checkpoint;
use crate::pipeline::despeckle_image;
use crate::rng::Rng;
use crate::speckle::{corrupt, LooksCount, DEFAULT_LOG_FLOOR};
use crate::{Error, Result};

const KEYS: &[&str] = &[
    "seed",
    "metrics",
    "ref",
    "est",
    "noisy",
    "checkpoint",
    "instances",
    "looks",
    "enl_region",
    "samples",
    "log_floor",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Psnr,
    Enl,
    Wasserstein,
}

fn parse_metrics(cfg: &RunConfig) -> Result<Vec<Metric>> {
    let spec = cfg.get("metrics").unwrap_or("psnr");
    let mut metrics = Vec::new();
    for part in spec.split(',') {
        let m = match part.trim() {
            "psnr" => Metric::Psnr,
            "enl" => Metric::Enl,
            "wasserstein" => Metric::Wasserstein,
            other => {
                return Err(Error::Config(format!(
                    "unknown metric '{other}' (psnr, enl, wasserstein)"
                )))
            }
        };
        if !metrics.contains(&m) {
            metrics.push(m);
        }
    }
    Ok(metrics)
}

struct Row {
    image: String,
    metric: String,
    value: f64,
    sigma: f64,
}

fn peak_of(reference: &Image) -> Result<f64> {
    Ok(to_amplitude(reference)?.max())
}

pub fn run(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = super::load_config(args)?;
    cfg.restrict(KEYS)?;
    let metrics = parse_metrics(&cfg)?;
    let looks = LooksCount::new(cfg.get_parsed("looks", 1.0)?)?;
    let samples = cfg.get_parsed("samples", 100_000usize)?;
    let log_floor = cfg.get_parsed("log_floor", DEFAULT_LOG_FLOOR)?;
    let region = cfg.get("enl_region").map(Region::parse).transpose()?;
    if metrics.contains(&Metric::Enl) && region.is_none() {
        return Err(Error::Config(
            "metric 'enl' requires the enl_region key (x,y,w,h)".to_string(),
        ));
    }
    let est_path = cfg.get_path("est");
    let ckpt_path = cfg.get_path("checkpoint");
    let mut rows: Vec<Row> = Vec::new();

    if let Some(est_path) = est_path {
        if ckpt_path.is_some() {
            return Err(Error::Config(
                "give either 'est' (direct mode) or 'checkpoint' (protocol mode), not both"
                    .to_string(),
            ));
        }
        // direct mode
        let est = image_file::read_image(&est_path)?;
        let name = est_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("est")
            .to_string();
        for metric in &metrics {
            match metric {
                Metric::Psnr => {
                    let reference = image_file::read_image(&cfg.require_path("ref")?)?;
                    let peak = peak_of(&reference)?;
                    let v = psnr_amplitude(&reference, &est, peak)?;
                    rows.push(Row {
                        image: name.clone(),
                        metric: "psnr".to_string(),
                        value: v,
                        sigma: 0.0,
                    });
                }
                Metric::Enl => {
                    let v = enl(&est, &region.unwrap())?;
                    rows.push(Row {
                        image: name.clone(),
                        metric: "enl".to_string(),
                        value: v,
                        sigma: 0.0,
                    });
                }
                Metric::Wasserstein => {
                    let noisy = image_file::read_image(&cfg.require_path("noisy")?)?;
                    let v = wasserstein_residual(&noisy, &est, looks, samples)?;
                    rows.push(Row {
                        image: name.clone(),
                        metric: "wasserstein".to_string(),
                        value: v,
                        sigma: 0.0,
                    });
                }
            }
        }
    } else {
        // protocol mode
        let ckpt_path = ckpt_path.ok_or_else(|| {
            Error::Config("evaluate needs 'est' (direct) or 'checkpoint' (protocol)".to_string())
        })?;
        let instances = cfg.get_parsed("instances", 20usize)?;
        if instances == 0 {
            return Err(Error::Config("instances must be >= 1".to_string()));
        }
        let reference = image_file::read_image(&cfg.require_path("ref")?)?;
        reference.expect_domain(Domain::Reflectivity).map_err(|_| {
            Error::Config("protocol mode needs a reflectivity reference".to_string())
        })?;
        let name = cfg
            .require_path("ref")?
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("ref")
            .to_string();
        let (params, _, _) = checkpoint::load(&ckpt_path)?;
        let peak = peak_of(&reference)?;
        let mut psnr_restored = Vec::with_capacity(instances);
        let mut psnr_noisy = Vec::with_capacity(instances);
        let mut enls = Vec::with_capacity(instances);
        let mut wassersteins = Vec::with_capacity(instances);
        for k in 0..instances {
            let mut rng = Rng::substream(seed, 0x6500_0000 + k as u64);
            let noisy = corrupt(&reference, looks, &mut rng, None)?;
            let restored = despeckle_image(&params, &noisy, log_floor)?;
            if metrics.contains(&Metric::Psnr) {
                psnr_restored.push(psnr_amplitude(&reference, &restored.intensity, peak)?);
                psnr_noisy.push(psnr_amplitude(&reference, &noisy, peak)?);
            }
            if metrics.contains(&Metric::Enl) {
                enls.push(enl(&restored.intensity, &region.unwrap())?);
            }
            if metrics.contains(&Metric::Wasserstein) {
                wassersteins.push(wasserstein_residual(
                    &noisy,
                    &restored.intensity,
                    looks,
                    samples,
                )?);
            }
        }
        let mut push = |metric: &str, values: &[f64]| {
            let (mean, sigma) = mean_sigma(values);
            rows.push(Row {
                image: name.clone(),
                metric: metric.to_string(),
                value: mean,
                sigma,
            });
        };
        if metrics.contains(&Metric::Psnr) {
            push("psnr", &psnr_restored);
            push("psnr_noisy", &psnr_noisy);
        }
        if metrics.contains(&Metric::Enl) {
            push("enl", &enls);
        }
        if metrics.contains(&Metric::Wasserstein) {
            push("wasserstein", &wassersteins);
        }
        rows.push(Row {
            image: name,
            metric: "instances".to_string(),
            value: instances as f64,
            sigma: 0.0,
        });
    }

    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join("metrics.csv");
    let mut csv = String::from("image,metric,value,sigma\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.image, r.metric, r.value, r.sigma));
    }
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let mut manifest = Manifest::new("evaluate", seed, cfg.hash());
    manifest.push(&csv_path, out);
    manifest.write(out)?;
    println!("evaluate: wrote {} metric rows to {}", rows.len(), csv_path.display());
    Ok(())
}
