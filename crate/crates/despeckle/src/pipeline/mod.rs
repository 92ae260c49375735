//! Dataset synthesis, the three-phase training procedure with temporal
//! change compensation, and inference.

pub mod dataset;
pub mod infer;
pub mod synth;
pub mod train;

use crate::image::{Domain, Image};
use crate::losses::LossKind;
use crate::nn::Phase;
use crate::speckle::DEFAULT_LOG_FLOOR;
use crate::{Error, Result};

pub use dataset::{make_synthetic_dataset, patch_positions, PatchPair, SyntheticPairs};
pub use infer::{despeckle_image, despeckle_tiled, pre_estimate, DespeckleOutput};
pub use synth::{simulate_time_series, synth_reflectivity, ChangeModel};
pub use train::{train, TrainData, TrainReport};

/// A co-registered stack of intensity acquisitions over one scene. The
/// per-date reflectivity truths and change masks come from the simulator and
/// are used for evaluation only, never for training.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    frames: Vec<Image>,
    truths: Vec<Image>,
    change_masks: Vec<Vec<bool>>,
}

impl TimeSeries {
    pub fn new(
        frames: Vec<Image>,
        truths: Vec<Image>,
        change_masks: Vec<Vec<bool>>,
    ) -> Result<TimeSeries> {
        if frames.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a time series needs at least 2 dates, got {}",
                frames.len()
            )));
        }
        for f in &frames {
            f.expect_domain(Domain::Intensity)?;
            frames[0].expect_same_shape(f)?;
        }
        if !truths.is_empty() && truths.len() != frames.len() {
            return Err(Error::ShapeMismatch(
                "one truth image per date required".to_string(),
            ));
        }
        if !change_masks.is_empty() && change_masks.len() != frames.len() {
            return Err(Error::ShapeMismatch(
                "one change mask per date required".to_string(),
            ));
        }
        Ok(TimeSeries {
            frames,
            truths,
            change_masks,
        })
    }

    /// Stack without ground truth, e.g. real acquisitions loaded from disk.
    pub fn from_frames(frames: Vec<Image>) -> Result<TimeSeries> {
        TimeSeries::new(frames, Vec::new(), Vec::new())
    }

    pub fn dates(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, date: usize) -> &Image {
        &self.frames[date]
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn truth(&self, date: usize) -> Option<&Image> {
        self.truths.get(date)
    }

    pub fn change_mask(&self, date: usize) -> Option<&[bool]> {
        self.change_masks.get(date).map(|m| m.as_slice())
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

/// Everything one training phase needs to know.
#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub phase: Phase,
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub seed: u64,
    /// Looks of the speckle model: drives phase-A synthesis and the l2 bias.
    pub looks: f64,
    pub loss: LossKind,
    pub base_lr: f64,
    /// Phase B/C: compensate the target for temporal changes.
    pub change_compensation: bool,
    /// Phase B: subsampling factor of the pre-estimates.
    pub subsample_factor: usize,
    /// Phase C: number of compensation refresh blocks.
    pub refinement_iterations: usize,
    /// Phase C: epochs trained per refresh block.
    pub epochs_per_iteration: usize,
    pub log_floor: f64,
    /// Global-norm gradient clip; 0 disables. Single-look likelihood
    /// gradients are heavy-tailed (exp of the log residual), and rare
    /// outlier batches otherwise kick the weights far from the data early
    /// in training.
    pub clip_norm: f64,
}

impl PhaseConfig {
    pub fn defaults(phase: Phase, seed: u64) -> PhaseConfig {
        PhaseConfig {
            phase,
            epochs: match phase {
                Phase::A => 12,
                Phase::B => 20,
                Phase::C => 10,
            },
            batch_size: 4,
            patch_size: 64,
            stride: 32,
            seed,
            looks: 1.0,
            loss: LossKind::Likelihood,
            base_lr: crate::nn::adam::DEFAULT_BASE_LR,
            change_compensation: true,
            subsample_factor: 2,
            refinement_iterations: 1,
            epochs_per_iteration: 10,
            log_floor: DEFAULT_LOG_FLOOR,
            clip_norm: 1.0,
        }
    }

    pub fn validate(&self, net: &crate::nn::NetworkConfig) -> Result<()> {
        net.validate()?;
        if self.patch_size % net.divisor() != 0 {
            return Err(Error::Config(format!(
                "patch size {} not divisible by 2^depth = {}",
                self.patch_size,
                net.divisor()
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".to_string()));
        }
        if self.epochs == 0 && self.phase != Phase::C {
            return Err(Error::Config("epochs must be >= 1".to_string()));
        }
        if self.phase == Phase::C
            && (self.refinement_iterations == 0 || self.epochs_per_iteration == 0)
        {
            return Err(Error::Config(
                "phase C needs refinement_iterations >= 1 and epochs_per_iteration >= 1"
                    .to_string(),
            ));
        }
        if self.subsample_factor == 0 {
            return Err(Error::Config("subsample factor must be >= 1".to_string()));
        }
        crate::speckle::LooksCount::new(self.looks)?;
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log floor must be positive".to_string()));
        }
        if !(self.base_lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".to_string()));
        }
        Ok(())
    }
}

/// Replace the target's scene by the reference scene, keeping its speckle:
/// y2 - xhat2 + xhat1 in the log domain.
pub fn compensate_change(y2: &Image, xhat1: &Image, xhat2: &Image) -> Result<Image> {
    y2.expect_domain(Domain::LogIntensity)?;
    xhat1.expect_domain(Domain::LogIntensity)?;
    xhat2.expect_domain(Domain::LogIntensity)?;
    y2.expect_same_shape(xhat1)?;
    y2.expect_same_shape(xhat2)?;
    let values = y2
        .values()
        .iter()
        .zip(xhat1.values())
        .zip(xhat2.values())
        .map(|((&y, &x1), &x2)| y - x2 + x1)
        .collect();
    Image::new(y2.width(), y2.height(), Domain::LogIntensity, values)
}
