//! Training pairs for phase A: the same clean patch under two independent
//! speckle draws, log-transformed. Speckle is redrawn every epoch.

use crate::image::{Domain, Image};
use crate::rng::Rng;
use crate::speckle::{sample_gamma_unit_mean, LooksCount};
use crate::{Error, Result};

/// One training sample: input and target log-intensity patches.
#[derive(Debug, Clone)]
pub struct PatchPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Top-left corners of the patch grid: 0, stride, 2*stride, ... while the
/// patch still fits.
pub fn patch_positions(width: usize, height: usize, patch: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut positions = Vec::new();
    if width < patch || height < patch {
        return positions;
    }
    let mut y = 0;
    while y + patch <= height {
        let mut x = 0;
        while x + patch <= width {
            positions.push((x, y));
            x += stride;
        }
        y += stride;
    }
    positions
}

/// Deterministic generator of noisy patch pairs over a set of clean scenes.
pub struct SyntheticPairs {
    clean: Vec<Image>,
    /// (image index, x, y) per grid patch.
    positions: Vec<(usize, usize, usize)>,
    patch: usize,
    looks: LooksCount,
    log_floor: f64,
    seed: u64,
}

/// Build the phase-A pair stream: every clean image is cut into a patch grid
/// and each patch will be emitted with two fresh independent speckle draws
/// per epoch.
pub fn make_synthetic_dataset(
    clean: &[Image],
    looks: LooksCount,
    patch: usize,
    stride: usize,
    log_floor: f64,
    seed: u64,
) -> Result<SyntheticPairs> {
    if clean.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one clean image".to_string(),
        ));
    }
    if !(log_floor > 0.0) {
        return Err(Error::InvalidArgument(
            "log floor must be positive".to_string(),
        ));
    }
    let mut positions = Vec::new();
    for (i, img) in clean.iter().enumerate() {
        img.expect_domain(Domain::Reflectivity)?;
        if img.width() < patch || img.height() < patch {
            return Err(Error::InvalidArgument(format!(
                "clean image {i} ({}x{}) is smaller than the patch size {patch}",
                img.width(),
                img.height()
            )));
        }
        for (x, y) in patch_positions(img.width(), img.height(), patch, stride) {
            positions.push((i, x, y));
        }
    }
    Ok(SyntheticPairs {
        clean: clean.to_vec(),
        positions,
        patch,
        looks,
        log_floor,
        seed,
    })
}

impl SyntheticPairs {
    pub fn patches_per_epoch(&self) -> usize {
        self.positions.len()
    }

    pub fn patch_size(&self) -> usize {
        self.patch
    }

    /// Emit the epoch's pairs: fresh independent speckle on both members,
    /// order shuffled. Same (seed, epoch) always produces identical pairs.
    pub fn pairs_for_epoch(&self, epoch: usize) -> Vec<PatchPair> {
        let mut rng = Rng::substream(self.seed, 0x4100_0000 + epoch as u64);
        let p = self.patch;
        let mut pairs = Vec::with_capacity(self.positions.len());
        for &(img_idx, x0, y0) in &self.positions {
            let img = &self.clean[img_idx];
            let mut input = Vec::with_capacity(p * p);
            let mut target = Vec::with_capacity(p * p);
            for y in y0..y0 + p {
                for x in x0..x0 + p {
                    let xv = img.get(x, y);
                    let s1 = sample_gamma_unit_mean(self.looks, &mut rng);
                    let s2 = sample_gamma_unit_mean(self.looks, &mut rng);
                    input.push((xv * s1).max(self.log_floor).ln());
                    target.push((xv * s2).max(self.log_floor).ln());
                }
            }
            pairs.push(PatchPair { input, target });
        }
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        rng.shuffle(&mut order);
        order.into_iter().map(|i| pairs[i].clone()).collect()
    }
}
