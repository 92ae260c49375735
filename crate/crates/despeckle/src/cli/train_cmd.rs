//! `train`: run one pipeline phase from config, writing checkpoints, a CSV
//! report, a JSONL event log (one record per epoch) and a manifest.

use super::CommonArgs;
use crate::image::Domain;
use crate::io::{image_file, Manifest, RunConfig};
use crate::losses::LossKind;
use crate::nn::{NetworkConfig, Phase};
use crate::pipeline::{PhaseConfig, TimeSeries, TrainData, TrainReport};
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

const KEYS: &[&str] = &[
    "seed",
    "phase",
    "data_dir",
    "init_checkpoint",
    "resume",
    "epochs",
    "batch_size",
    "patch_size",
    "stride",
    "looks",
    "loss",
    "base_lr",
    "change_compensation",
    "subsample_factor",
    "refinement_iterations",
    "epochs_per_iteration",
    "depth",
    "channels",
    "kernel_size",
    "leaky_slope",
    "log_floor",
];

fn network_config(cfg: &RunConfig) -> Result<NetworkConfig> {
    let default = NetworkConfig::default();
    let depth = cfg.get_parsed("depth", default.depth)?;
    let channels = cfg.get_usize_list("channels", &default.channels)?;
    let net = NetworkConfig {
        depth,
        channels,
        kernel: cfg.get_parsed("kernel_size", default.kernel)?,
        leaky_slope: cfg.get_parsed("leaky_slope", default.leaky_slope)?,
    };
    net.validate()?;
    Ok(net)
}

fn phase_config(cfg: &RunConfig, seed: u64) -> Result<PhaseConfig> {
    let phase = Phase::parse(cfg.require("phase")?)?;
    let mut pc = PhaseConfig::defaults(phase, seed);
    pc.epochs = cfg.get_parsed("epochs", pc.epochs)?;
    pc.batch_size = cfg.get_parsed("batch_size", pc.batch_size)?;
    pc.patch_size = cfg.get_parsed("patch_size", pc.patch_size)?;
    pc.stride = cfg.get_parsed("stride", pc.stride)?;
    pc.looks = cfg.get_parsed("looks", pc.looks)?;
    pc.loss = LossKind::parse(cfg.get("loss").unwrap_or("likelihood"))?;
    pc.base_lr = cfg.get_parsed("base_lr", pc.base_lr)?;
    pc.change_compensation = cfg.get_bool("change_compensation", pc.change_compensation)?;
    pc.subsample_factor = cfg.get_parsed("subsample_factor", pc.subsample_factor)?;
    pc.refinement_iterations = cfg.get_parsed("refinement_iterations", pc.refinement_iterations)?;
    pc.epochs_per_iteration = cfg.get_parsed("epochs_per_iteration", pc.epochs_per_iteration)?;
    pc.log_floor = cfg.get_parsed("log_floor", pc.log_floor)?;
    Ok(pc)
}

/// Phase-A training set: every `.s2s1` in the directory, all reflectivity.
fn load_clean_images(dir: &Path) -> Result<Vec<crate::image::Image>> {
    let paths = super::list_images_sorted(dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no .s2s1 images found in {}",
            dir.display()
        )));
    }
    let mut images = Vec::with_capacity(paths.len());
    for p in paths {
        let img = image_file::read_image(&p)?;
        if img.domain() != Domain::Reflectivity {
            return Err(Error::Config(format!(
                "{} is {} but phase A trains on reflectivity images",
                p.display(),
                img.domain().name()
            )));
        }
        images.push(img);
    }
    Ok(images)
}

/// Phase-B/C training set: files named `<series>_date<NNN>.s2s1`, grouped by
/// series prefix and sorted by date index.
fn load_series(dir: &Path) -> Result<Vec<TimeSeries>> {
    let paths = super::list_images_sorted(dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no .s2s1 images found in {}",
            dir.display()
        )));
    }
    let mut groups: std::collections::BTreeMap<String, Vec<(usize, std::path::PathBuf)>> =
        std::collections::BTreeMap::new();
    for p in paths {
        let stem = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let (prefix, date_part) = stem.rsplit_once("_date").ok_or_else(|| {
            Error::Config(format!(
                "{}: series files must be named <series>_date<NNN>.s2s1",
                p.display()
            ))
        })?;
        let date: usize = date_part.parse().map_err(|_| {
            Error::Config(format!("{}: bad date index '{date_part}'", p.display()))
        })?;
        groups.entry(prefix.to_string()).or_default().push((date, p));
    }
    let mut series = Vec::new();
    for (_, mut dates) in groups {
        dates.sort();
        let mut frames = Vec::with_capacity(dates.len());
        for (_, p) in dates {
            frames.push(image_file::read_image(&p)?);
        }
        series.push(TimeSeries::from_frames(frames)?);
    }
    Ok(series)
}

fn write_report(report: &TrainReport, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let csv_path = out.join("report.csv");
    let mut csv = String::from("epoch,mean_loss,lr\n");
    for r in &report.epochs {
        csv.push_str(&format!("{},{},{}\n", r.epoch, r.mean_loss, r.lr));
    }
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    manifest.push(&csv_path, out);

    let jsonl_path = out.join("events.jsonl");
    let mut f = std::fs::File::create(&jsonl_path).map_err(|e| Error::io(&jsonl_path, e))?;
    for r in &report.epochs {
        let record = serde_json::json!({
            "event": "epoch",
            "phase": report.phase.name(),
            "epoch": r.epoch,
            "mean_loss": r.mean_loss,
            "lr": r.lr,
            "flags": report.flags,
        });
        writeln!(f, "{record}").map_err(|e| Error::io(&jsonl_path, e))?;
    }
    manifest.push(&jsonl_path, out);
    Ok(())
}

pub fn run(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = super::load_config(args)?;
    cfg.restrict(KEYS)?;
    let net = network_config(&cfg)?;
    let pc = phase_config(&cfg, seed)?;
    pc.validate(&net)?;
    let data_dir = cfg.require_path("data_dir")?;
    let init = cfg.get_path("init_checkpoint");
    let resume = cfg.get_path("resume");
    // load and validate all inputs before any output exists
    let clean;
    let series;
    let data = match pc.phase {
        Phase::A => {
            clean = load_clean_images(&data_dir)?;
            TrainData::Synthetic(&clean)
        }
        Phase::B | Phase::C => {
            series = load_series(&data_dir)?;
            TrainData::Series(&series)
        }
    };
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let report = crate::pipeline::train(&pc, &net, &data, init.as_deref(), resume.as_deref(), out)?;
    let mut manifest = Manifest::new("train", seed, cfg.hash());
    manifest.push(&report.final_checkpoint, out);
    manifest.push(&report.latest_checkpoint, out);
    for p in &report.iteration_checkpoints {
        manifest.push(p, out);
    }
    write_report(&report, out, &mut manifest)?;
    manifest.write(out)?;
    let last = report.epochs.last();
    println!(
        "train phase {}: {} epochs, final mean loss {}",
        report.phase.name(),
        report.epochs.len(),
        last.map(|r| r.mean_loss.to_string()).unwrap_or_default()
    );
    Ok(())
}
