//! The three-phase training procedure.
//!
//! Phase A trains on synthetic pairs (same clean patch, two independent
//! speckle draws). Phase B trains on random ordered date pairs from real or
//! simulated time series, compensating the target for temporal changes with
//! pre-estimates from the phase-A network (subsampled to loosen spatial
//! correlation). Phase C refines: the compensation images are recomputed
//! from the current network itself at full resolution every
//! `epochs_per_iteration` epochs.
//!
//! Determinism contract: all weights and optimizer moments are quantized
//! through f32 (the checkpoint precision) at every epoch boundary, and each
//! epoch's data stream is derived from (seed, phase, epoch) alone. A run
//! that stops at a saved checkpoint and resumes is therefore bit-identical
//! to one that never stopped.

use super::dataset::{make_synthetic_dataset, patch_positions, PatchPair};
use super::infer::pre_estimate;
use super::{PhaseConfig, TimeSeries};
use crate::image::Image;
use crate::io::fnv1a64;
use crate::losses::LossKind;
use crate::nn::adam::{adam_step_with_lr, effective_lr, AdamState};
use crate::nn::checkpoint::{self, CheckpointMeta, Phase, ProvenanceEntry};
use crate::nn::{backward, forward, NetworkConfig, NetworkParams, Tensor};
use crate::rng::Rng;
use crate::speckle::{log_transform, LooksCount};
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// Input data for one phase.
pub enum TrainData<'a> {
    /// Clean reflectivity scenes (phase A).
    Synthetic(&'a [Image]),
    /// Co-registered intensity stacks (phases B and C).
    Series(&'a [TimeSeries]),
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

/// What a call to [`train`] produced.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub phase: Phase,
    pub flags: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    pub final_checkpoint: PathBuf,
    pub latest_checkpoint: PathBuf,
    /// Phase C: checkpoint after each refinement iteration.
    pub iteration_checkpoints: Vec<PathBuf>,
    pub provenance: Vec<ProvenanceEntry>,
}

fn config_hash(cfg: &PhaseConfig, net: &NetworkConfig) -> String {
    format!("{:016x}", fnv1a64(format!("{cfg:?}|{net:?}").as_bytes()))
}

/// Run one phase of training. `init_checkpoint` carries the previous phase's
/// weights (required for B and C); `resume` continues an interrupted run
/// from its "latest" checkpoint.
pub fn train(
    cfg: &PhaseConfig,
    net_cfg: &NetworkConfig,
    data: &TrainData,
    init_checkpoint: Option<&Path>,
    resume: Option<&Path>,
    out_dir: &Path,
) -> Result<TrainReport> {
    cfg.validate(net_cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    match cfg.phase {
        Phase::A => {
            let clean = match data {
                TrainData::Synthetic(clean) => *clean,
                TrainData::Series(_) => {
                    return Err(Error::InvalidArgument(
                        "phase A trains on clean reflectivity images".to_string(),
                    ))
                }
            };
            train_phase_a(cfg, net_cfg, clean, resume, out_dir)
        }
        Phase::B | Phase::C => {
            let series = match data {
                TrainData::Series(series) => *series,
                TrainData::Synthetic(_) => {
                    return Err(Error::InvalidArgument(
                        "phases B and C train on time series".to_string(),
                    ))
                }
            };
            train_on_series(cfg, net_cfg, series, init_checkpoint, resume, out_dir)
        }
    }
}

struct Trainer {
    params: NetworkParams,
    adam: AdamState,
    provenance: Vec<ProvenanceEntry>,
    flags: Vec<String>,
    start_epoch: usize,
    records: Vec<EpochRecord>,
}

impl Trainer {
    fn meta(&self, cfg: &PhaseConfig, epoch: usize) -> CheckpointMeta {
        CheckpointMeta {
            network: self.params.config.clone(),
            phase: cfg.phase,
            epoch,
            adam_step: self.adam.step,
            base_lr: cfg.base_lr,
            seed: cfg.seed,
            loss: cfg.loss.name().to_string(),
            provenance: self.provenance.clone(),
            flags: self.flags.clone(),
        }
    }

    /// Quantize state through f32 and write the resumable checkpoint.
    fn end_epoch(&mut self, cfg: &PhaseConfig, epoch: usize, path: &Path) -> Result<()> {
        self.params.round_trip_f32();
        self.adam.round_trip_f32();
        checkpoint::save(path, &self.params, Some(&self.adam), &self.meta(cfg, epoch))
    }
}

fn init_trainer(
    cfg: &PhaseConfig,
    net_cfg: &NetworkConfig,
    init_checkpoint: Option<&Path>,
    resume: Option<&Path>,
) -> Result<Trainer> {
    if let Some(path) = resume {
        let (params, adam, meta) = checkpoint::load(path)?;
        if meta.phase != cfg.phase {
            return Err(Error::Config(format!(
                "resume checkpoint is from phase {}, config says {}",
                meta.phase.name(),
                cfg.phase.name()
            )));
        }
        if &meta.network != net_cfg {
            return Err(Error::Config(
                "resume checkpoint architecture differs from the configured network".to_string(),
            ));
        }
        let adam = adam.ok_or_else(|| {
            Error::MissingArtifact(format!(
                "checkpoint {} carries no optimizer state and cannot be resumed",
                path.display()
            ))
        })?;
        return Ok(Trainer {
            params,
            adam,
            flags: meta.flags.clone(),
            provenance: meta.provenance,
            start_epoch: meta.epoch + 1,
            records: Vec::new(),
        });
    }
    let entry = |cfg: &PhaseConfig, net: &NetworkConfig| ProvenanceEntry {
        phase: cfg.phase,
        seed: cfg.seed,
        config_hash: config_hash(cfg, net),
    };
    match cfg.phase {
        Phase::A => {
            let mut rng = Rng::substream(cfg.seed, 0x1217);
            let mut params = NetworkParams::init(net_cfg, &mut rng)?;
            params.round_trip_f32();
            let adam = AdamState::new(&params, cfg.base_lr);
            Ok(Trainer {
                params,
                adam,
                provenance: vec![entry(cfg, net_cfg)],
                flags: Vec::new(),
                start_epoch: 1,
                records: Vec::new(),
            })
        }
        Phase::B | Phase::C => {
            let required_parent = if cfg.phase == Phase::B { Phase::A } else { Phase::B };
            let path = init_checkpoint.ok_or_else(|| {
                Error::MissingArtifact(format!(
                    "phase {} requires a phase-{} checkpoint (init_checkpoint)",
                    cfg.phase.name(),
                    required_parent.name()
                ))
            })?;
            let (params, _, meta) = checkpoint::load(path)?;
            if meta.phase != required_parent {
                return Err(Error::Config(format!(
                    "phase {} must start from a phase-{} checkpoint, got phase {}",
                    cfg.phase.name(),
                    required_parent.name(),
                    meta.phase.name()
                )));
            }
            if &meta.network != net_cfg {
                return Err(Error::Config(
                    "init checkpoint architecture differs from the configured network".to_string(),
                ));
            }
            let adam = AdamState::new(&params, cfg.base_lr);
            let mut provenance = meta.provenance;
            provenance.push(entry(cfg, net_cfg));
            let mut flags = Vec::new();
            if !cfg.change_compensation {
                flags.push("no-compensation".to_string());
            }
            Ok(Trainer {
                params,
                adam,
                provenance,
                flags,
                start_epoch: 1,
                records: Vec::new(),
            })
        }
    }
}

/// One pass over the epoch's pairs. Gradients are scaled to a per-pixel
/// mean; the returned loss is the mean per-pixel loss over full batches.
fn run_epoch(
    trainer: &mut Trainer,
    pairs: &[PatchPair],
    patch: usize,
    batch_size: usize,
    loss_kind: LossKind,
    looks: LooksCount,
    lr: f64,
) -> Result<f64> {
    let px = patch * patch;
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in pairs.chunks(batch_size) {
        if chunk.len() < batch_size {
            break; // ragged tail is dropped; the shuffle rotates what it hits
        }
        let mut input = Vec::with_capacity(batch_size * px);
        let mut target = Vec::with_capacity(batch_size * px);
        for pair in chunk {
            input.extend_from_slice(&pair.input);
            target.extend_from_slice(&pair.target);
        }
        let input = Tensor::from_vec(batch_size, 1, patch, patch, input)?;
        let (out, cache) = forward(&trainer.params, &input)?;
        let loss = loss_kind.eval(&out.data, &target, looks)?;
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!("non-finite training loss {}", loss.total)));
        }
        let mut grad = loss_kind.grad(&out.data, &target, looks)?;
        let scale = 1.0 / (batch_size * px) as f64;
        for g in grad.iter_mut() {
            *g *= scale;
        }
        let grad = Tensor::from_vec(batch_size, 1, patch, patch, grad)?;
        let grads = backward(&trainer.params, &cache, &grad)?;
        adam_step_with_lr(&mut trainer.adam, &mut trainer.params, &grads, lr)?;
        total += loss.total * scale;
        batches += 1;
    }
    if batches == 0 {
        return Err(Error::InvalidArgument(format!(
            "not enough patches ({}) for a single batch of {batch_size}",
            pairs.len()
        )));
    }
    Ok(total / batches as f64)
}

fn train_phase_a(
    cfg: &PhaseConfig,
    net_cfg: &NetworkConfig,
    clean: &[Image],
    resume: Option<&Path>,
    out_dir: &Path,
) -> Result<TrainReport> {
    let looks = LooksCount::new(cfg.looks)?;
    let dataset = make_synthetic_dataset(
        clean,
        looks,
        cfg.patch_size,
        cfg.stride,
        cfg.log_floor,
        cfg.seed,
    )?;
    let mut trainer = init_trainer(cfg, net_cfg, None, resume)?;
    let latest = out_dir.join("latest.ckpt");
    for epoch in trainer.start_epoch..=cfg.epochs {
        let pairs = dataset.pairs_for_epoch(epoch);
        let lr = effective_lr(cfg.base_lr, epoch);
        let mean_loss = run_epoch(
            &mut trainer,
            &pairs,
            cfg.patch_size,
            cfg.batch_size,
            cfg.loss,
            looks,
            lr,
        )?;
        trainer.records.push(EpochRecord { epoch, mean_loss, lr });
        trainer.end_epoch(cfg, epoch, &latest)?;
    }
    finalize(cfg, trainer, out_dir, Vec::new())
}

/// Log-transformed frames of every series.
fn log_stacks(series: &[TimeSeries], floor: f64) -> Result<Vec<Vec<Image>>> {
    series
        .iter()
        .map(|s| s.frames().iter().map(|f| log_transform(f, floor)).collect())
        .collect()
}

/// Pre-estimates for every date of every series at the given subsampling.
fn estimate_stacks(
    params: &NetworkParams,
    series: &[TimeSeries],
    factor: usize,
    floor: f64,
) -> Result<Vec<Vec<Image>>> {
    series
        .iter()
        .map(|s| {
            s.frames()
                .iter()
                .map(|f| pre_estimate(params, f, factor, floor))
                .collect()
        })
        .collect()
}

/// The epoch's sample stream over the series: every grid position of every
/// series paired with an ordered date pair dealt from a shuffled deck
/// (without replacement until the deck runs out).
fn series_pairs_for_epoch(
    ylogs: &[Vec<Image>],
    xhats: Option<&[Vec<Image>]>,
    cfg: &PhaseConfig,
    epoch: usize,
) -> Vec<PatchPair> {
    let phase_tag = match cfg.phase {
        Phase::A => 0x4100_0000u64,
        Phase::B => 0x4200_0000,
        Phase::C => 0x4300_0000,
    };
    let mut rng = Rng::substream(cfg.seed, phase_tag + epoch as u64);
    let p = cfg.patch_size;
    let mut pairs = Vec::new();
    for (si, stack) in ylogs.iter().enumerate() {
        let dates = stack.len();
        let mut deck: Vec<(usize, usize)> = Vec::with_capacity(dates * (dates - 1));
        for i in 0..dates {
            for j in 0..dates {
                if i != j {
                    deck.push((i, j));
                }
            }
        }
        rng.shuffle(&mut deck);
        let mut deck_pos = 0usize;
        let (w, h) = (stack[0].width(), stack[0].height());
        for (x0, y0) in patch_positions(w, h, p, cfg.stride) {
            if deck_pos == deck.len() {
                rng.shuffle(&mut deck);
                deck_pos = 0;
            }
            let (i, j) = deck[deck_pos];
            deck_pos += 1;
            let input = stack[i].crop(x0, y0, p, p).expect("grid patch in bounds");
            let target_raw = stack[j].crop(x0, y0, p, p).expect("grid patch in bounds");
            let target = match xhats {
                None => target_raw.values().to_vec(),
                Some(est) => {
                    let xi = est[si][i].crop(x0, y0, p, p).expect("grid patch in bounds");
                    let xj = est[si][j].crop(x0, y0, p, p).expect("grid patch in bounds");
                    target_raw
                        .values()
                        .iter()
                        .zip(xj.values())
                        .zip(xi.values())
                        .map(|((&y, &a), &b)| y - a + b)
                        .collect()
                }
            };
            pairs.push(PatchPair {
                input: input.values().to_vec(),
                target,
            });
        }
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    rng.shuffle(&mut order);
    order.into_iter().map(|i| pairs[i].clone()).collect()
}

fn train_on_series(
    cfg: &PhaseConfig,
    net_cfg: &NetworkConfig,
    series: &[TimeSeries],
    init_checkpoint: Option<&Path>,
    resume: Option<&Path>,
    out_dir: &Path,
) -> Result<TrainReport> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("no time series provided".to_string()));
    }
    let looks = LooksCount::new(cfg.looks)?;
    let mut trainer = init_trainer(cfg, net_cfg, init_checkpoint, resume)?;
    let ylogs = log_stacks(series, cfg.log_floor)?;
    let latest = out_dir.join("latest.ckpt");
    let lr = cfg.base_lr / 100.0;
    let mut iteration_checkpoints = Vec::new();

    match cfg.phase {
        Phase::B => {
            // compensation images come from the phase-A network, subsampled;
            // they stay fixed through the whole phase
            let xhats = if cfg.change_compensation {
                let (init_params, _, _) = checkpoint::load(init_checkpoint.ok_or_else(|| {
                    Error::MissingArtifact("phase B requires init_checkpoint".to_string())
                })?)?;
                Some(estimate_stacks(
                    &init_params,
                    series,
                    cfg.subsample_factor,
                    cfg.log_floor,
                )?)
            } else {
                None
            };
            for epoch in trainer.start_epoch..=cfg.epochs {
                let pairs = series_pairs_for_epoch(&ylogs, xhats.as_deref(), cfg, epoch);
                let mean_loss = run_epoch(
                    &mut trainer,
                    &pairs,
                    cfg.patch_size,
                    cfg.batch_size,
                    cfg.loss,
                    looks,
                    lr,
                )?;
                trainer.records.push(EpochRecord { epoch, mean_loss, lr });
                trainer.end_epoch(cfg, epoch, &latest)?;
            }
        }
        Phase::C => {
            let total_epochs = cfg.refinement_iterations * cfg.epochs_per_iteration;
            if trainer.start_epoch != 1 && (trainer.start_epoch - 1) % cfg.epochs_per_iteration != 0
            {
                return Err(Error::Config(
                    "phase C resumes only at refinement-iteration boundaries".to_string(),
                ));
            }
            let mut xhats: Option<Vec<Vec<Image>>> = None;
            for epoch in trainer.start_epoch..=total_epochs {
                if (epoch - 1) % cfg.epochs_per_iteration == 0 {
                    // refresh compensation from the current network, full res
                    xhats = if cfg.change_compensation {
                        Some(estimate_stacks(&trainer.params, series, 1, cfg.log_floor)?)
                    } else {
                        None
                    };
                }
                let pairs = series_pairs_for_epoch(&ylogs, xhats.as_deref(), cfg, epoch);
                let mean_loss = run_epoch(
                    &mut trainer,
                    &pairs,
                    cfg.patch_size,
                    cfg.batch_size,
                    cfg.loss,
                    looks,
                    lr,
                )?;
                trainer.records.push(EpochRecord { epoch, mean_loss, lr });
                trainer.params.round_trip_f32();
                trainer.adam.round_trip_f32();
                if epoch % cfg.epochs_per_iteration == 0 {
                    checkpoint::save(
                        &latest,
                        &trainer.params,
                        Some(&trainer.adam),
                        &trainer.meta(cfg, epoch),
                    )?;
                    let iter_idx = epoch / cfg.epochs_per_iteration;
                    let path = out_dir.join(format!("refine_iter{iter_idx:02}.ckpt"));
                    checkpoint::save(&path, &trainer.params, None, &trainer.meta(cfg, epoch))?;
                    iteration_checkpoints.push(path);
                }
            }
        }
        Phase::A => unreachable!("phase A handled separately"),
    }
    finalize(cfg, trainer, out_dir, iteration_checkpoints)
}

fn finalize(
    cfg: &PhaseConfig,
    trainer: Trainer,
    out_dir: &Path,
    iteration_checkpoints: Vec<PathBuf>,
) -> Result<TrainReport> {
    let last_epoch = trainer.records.last().map(|r| r.epoch).unwrap_or(0);
    let final_path = out_dir.join("final.ckpt");
    checkpoint::save(
        &final_path,
        &trainer.params,
        None,
        &trainer.meta(cfg, last_epoch),
    )?;
    Ok(TrainReport {
        phase: cfg.phase,
        flags: trainer.flags,
        epochs: trainer.records,
        final_checkpoint: final_path,
        latest_checkpoint: out_dir.join("latest.ckpt"),
        iteration_checkpoints,
        provenance: trainer.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Domain;
    use crate::pipeline::synth::{simulate_time_series, ChangeModel};
    use crate::speckle::corrupt;

    fn tiny_net() -> NetworkConfig {
        NetworkConfig {
            depth: 1,
            channels: vec![8],
            kernel: 3,
            leaky_slope: 0.1,
        }
    }

    fn tiny_phase_a(seed: u64, epochs: usize) -> PhaseConfig {
        let mut cfg = PhaseConfig::defaults(Phase::A, seed);
        cfg.epochs = epochs;
        cfg.patch_size = 32;
        cfg.stride = 32;
        cfg
    }

    #[test]
    fn phase_a_on_constant_scene_reduces_variance_tenfold() {
        let clean: Vec<Image> = (0..4)
            .map(|_| Image::constant(96, 96, Domain::Reflectivity, 1.0).unwrap())
            .collect();
        let cfg = tiny_phase_a(11, 25);
        let tmp = tempfile::tempdir().unwrap();
        let report = train(
            &cfg,
            &tiny_net(),
            &TrainData::Synthetic(&clean),
            None,
            None,
            tmp.path(),
        )
        .unwrap();
        assert_eq!(report.epochs.len(), 25);
        // training loss must come down
        assert!(report.epochs.last().unwrap().mean_loss < report.epochs[0].mean_loss);

        let (params, _, _) = checkpoint::load(&report.final_checkpoint).unwrap();
        let mut rng = Rng::new(999);
        let held_out = Image::constant(96, 96, Domain::Reflectivity, 1.0).unwrap();
        let noisy = corrupt(&held_out, LooksCount::new(1.0).unwrap(), &mut rng, None).unwrap();
        let restored = crate::pipeline::despeckle_image(&params, &noisy, 1e-10)
            .unwrap()
            .intensity;
        let var_in = noisy.variance();
        let var_out = restored.variance();
        assert!(
            var_out * 10.0 < var_in,
            "variance reduction only {:.1}x (in {var_in:.4}, out {var_out:.4})",
            var_in / var_out
        );
    }

    #[test]
    fn training_loss_decreases_over_first_steps() {
        // strictly decreasing over 50 steps on a fixed batch, allowing two
        // non-monotone steps
        let mut rng = Rng::new(21);
        let clean = crate::pipeline::synth_reflectivity(32, 32, &mut rng).unwrap();
        let looks = LooksCount::new(1.0).unwrap();
        let ds = make_synthetic_dataset(&[clean], looks, 32, 32, 1e-10, 5).unwrap();
        let pairs = ds.pairs_for_epoch(1);
        let mut params = {
            let mut r = Rng::new(22);
            NetworkParams::init(&tiny_net(), &mut r).unwrap()
        };
        let mut adam = AdamState::new(&params, 1e-3);
        let input = Tensor::from_vec(1, 1, 32, 32, pairs[0].input.clone()).unwrap();
        let mut losses = Vec::new();
        for _ in 0..50 {
            let (out, cache) = forward(&params, &input).unwrap();
            let loss = LossKind::Likelihood
                .eval(&out.data, &pairs[0].target, looks)
                .unwrap();
            losses.push(loss.total);
            let mut grad = LossKind::Likelihood
                .grad(&out.data, &pairs[0].target, looks)
                .unwrap();
            for g in grad.iter_mut() {
                *g /= 1024.0;
            }
            let grad = Tensor::from_vec(1, 1, 32, 32, grad).unwrap();
            let grads = backward(&params, &cache, &grad).unwrap();
            adam_step_with_lr(&mut adam, &mut params, &grads, 1e-3).unwrap();
        }
        let violations = losses.windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(
            violations <= 2,
            "{violations} non-monotone steps in {losses:?}"
        );
    }

    #[test]
    fn phase_a_is_bit_reproducible() {
        let mut rng = Rng::new(31);
        let clean = vec![crate::pipeline::synth_reflectivity(64, 64, &mut rng).unwrap()];
        let cfg = tiny_phase_a(7, 2);
        let run = || {
            let tmp = tempfile::tempdir().unwrap();
            let report = train(
                &cfg,
                &tiny_net(),
                &TrainData::Synthetic(&clean),
                None,
                None,
                tmp.path(),
            )
            .unwrap();
            std::fs::read(&report.final_checkpoint).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let mut rng = Rng::new(41);
        let clean = vec![crate::pipeline::synth_reflectivity(64, 64, &mut rng).unwrap()];
        let net = tiny_net();
        // uninterrupted: 4 epochs
        let full = {
            let cfg = tiny_phase_a(3, 4);
            let tmp = tempfile::tempdir().unwrap();
            let report = train(&cfg, &net, &TrainData::Synthetic(&clean), None, None, tmp.path())
                .unwrap();
            std::fs::read(&report.final_checkpoint).unwrap()
        };
        // interrupted after 2, resumed to 4
        let resumed = {
            let tmp = tempfile::tempdir().unwrap();
            let cfg2 = tiny_phase_a(3, 2);
            let r1 = train(&cfg2, &net, &TrainData::Synthetic(&clean), None, None, tmp.path())
                .unwrap();
            let cfg4 = tiny_phase_a(3, 4);
            let r2 = train(
                &cfg4,
                &net,
                &TrainData::Synthetic(&clean),
                None,
                Some(&r1.latest_checkpoint),
                tmp.path(),
            )
            .unwrap();
            assert_eq!(r2.epochs.first().unwrap().epoch, 3);
            std::fs::read(&r2.final_checkpoint).unwrap()
        };
        assert_eq!(full, resumed);
    }

    #[test]
    fn lr_schedule_is_visible_in_report() {
        let mut rng = Rng::new(51);
        let clean = vec![crate::pipeline::synth_reflectivity(64, 64, &mut rng).unwrap()];
        let cfg = tiny_phase_a(5, 6);
        let tmp = tempfile::tempdir().unwrap();
        let report = train(
            &cfg,
            &tiny_net(),
            &TrainData::Synthetic(&clean),
            None,
            None,
            tmp.path(),
        )
        .unwrap();
        assert_eq!(report.epochs[4].lr, 1e-3); // epoch 5
        assert_eq!(report.epochs[5].lr, 1e-4); // epoch 6
    }

    #[test]
    fn phase_b_requires_phase_a_checkpoint() {
        let mut rng = Rng::new(61);
        let clean = crate::pipeline::synth_reflectivity(64, 64, &mut rng).unwrap();
        let series = vec![simulate_time_series(
            &clean,
            3,
            LooksCount::new(1.0).unwrap(),
            &ChangeModel::None,
            None,
            &mut rng,
        )
        .unwrap()];
        let mut cfg = PhaseConfig::defaults(Phase::B, 1);
        cfg.patch_size = 32;
        cfg.epochs = 1;
        let tmp = tempfile::tempdir().unwrap();
        let err = train(
            &cfg,
            &tiny_net(),
            &TrainData::Series(&series),
            None,
            None,
            tmp.path(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
        assert!(err.to_string().contains("phase-A checkpoint"));
    }

    #[test]
    fn phase_b_runs_and_flags_ablation() {
        let mut rng = Rng::new(71);
        let clean = vec![crate::pipeline::synth_reflectivity(64, 64, &mut rng).unwrap()];
        let net = tiny_net();
        let tmp = tempfile::tempdir().unwrap();
        let a_dir = tmp.path().join("a");
        let a_report = train(
            &tiny_phase_a(8, 2),
            &net,
            &TrainData::Synthetic(&clean),
            None,
            None,
            &a_dir,
        )
        .unwrap();
        let series = vec![simulate_time_series(
            &clean[0],
            3,
            LooksCount::new(1.0).unwrap(),
            &ChangeModel::regions(0.1),
            None,
            &mut rng,
        )
        .unwrap()];
        let mut cfg = PhaseConfig::defaults(Phase::B, 9);
        cfg.patch_size = 32;
        cfg.epochs = 2;
        cfg.change_compensation = false;
        let b_dir = tmp.path().join("b");
        let report = train(
            &cfg,
            &net,
            &TrainData::Series(&series),
            Some(&a_report.final_checkpoint),
            None,
            &b_dir,
        )
        .unwrap();
        assert!(report.flags.iter().any(|f| f == "no-compensation"));
        assert_eq!(report.epochs.len(), 2);
        // provenance chains A then B
        assert_eq!(report.provenance.len(), 2);
        assert_eq!(report.provenance[0].phase, Phase::A);
        assert_eq!(report.provenance[1].phase, Phase::B);
    }

    #[test]
    fn phase_c_chains_and_writes_iteration_checkpoints() {
        let mut rng = Rng::new(81);
        let clean = vec![crate::pipeline::synth_reflectivity(64, 64, &mut rng).unwrap()];
        let net = tiny_net();
        let tmp = tempfile::tempdir().unwrap();
        let a = train(
            &tiny_phase_a(1, 1),
            &net,
            &TrainData::Synthetic(&clean),
            None,
            None,
            &tmp.path().join("a"),
        )
        .unwrap();
        let series = vec![simulate_time_series(
            &clean[0],
            3,
            LooksCount::new(1.0).unwrap(),
            &ChangeModel::None,
            None,
            &mut rng,
        )
        .unwrap()];
        let mut bcfg = PhaseConfig::defaults(Phase::B, 2);
        bcfg.patch_size = 32;
        bcfg.epochs = 1;
        let b = train(
            &bcfg,
            &net,
            &TrainData::Series(&series),
            Some(&a.final_checkpoint),
            None,
            &tmp.path().join("b"),
        )
        .unwrap();
        let mut ccfg = PhaseConfig::defaults(Phase::C, 3);
        ccfg.patch_size = 32;
        ccfg.refinement_iterations = 2;
        ccfg.epochs_per_iteration = 1;
        let c = train(
            &ccfg,
            &net,
            &TrainData::Series(&series),
            Some(&b.final_checkpoint),
            None,
            &tmp.path().join("c"),
        )
        .unwrap();
        assert_eq!(c.iteration_checkpoints.len(), 2);
        let (_, _, meta) = checkpoint::load(&c.final_checkpoint).unwrap();
        let phases: Vec<Phase> = meta.provenance.iter().map(|p| p.phase).collect();
        assert_eq!(phases, vec![Phase::A, Phase::B, Phase::C]);
        // starting phase C from an A checkpoint is rejected
        let err = train(
            &ccfg,
            &net,
            &TrainData::Series(&series),
            Some(&a.final_checkpoint),
            None,
            &tmp.path().join("c2"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("phase-B checkpoint"));
    }
}
