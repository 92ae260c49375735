//! Procedural scene synthesis: textured reflectivity images, region-wise
//! reflectivity changes and whole simulated time series.

use super::TimeSeries;
use crate::image::{Domain, Image};
use crate::rng::Rng;
use crate::speckle::{corrupt, Kernel, LooksCount};
use crate::Result;

/// Textured positive reflectivity: a lumpy log-normal base built from random
/// low-frequency cosines, overlaid with a few contrasted regions so the
/// scene has both smooth areas and edges.
pub fn synth_reflectivity(width: usize, height: usize, rng: &mut Rng) -> Result<Image> {
    let n_waves = 10;
    let mut waves = Vec::with_capacity(n_waves);
    for _ in 0..n_waves {
        let wavelength = rng.range(12.0, 72.0);
        let angle = rng.range(0.0, std::f64::consts::TAU);
        let fx = angle.cos() / wavelength;
        let fy = angle.sin() / wavelength;
        let phase = rng.range(0.0, std::f64::consts::TAU);
        let amp = rng.range(0.4, 1.0);
        waves.push((fx, fy, phase, amp));
    }
    let mut field = vec![0.0f64; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut g = 0.0;
            for &(fx, fy, phase, amp) in &waves {
                g += amp
                    * (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).cos();
            }
            field[y * width + x] = g;
        }
    }
    // standardize, then exponentiate for a positive multiplicative texture
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let var = field.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-9);
    let mut values: Vec<f64> = field
        .iter()
        .map(|&v| (0.7 * (v - mean) / std).exp())
        .collect();
    // contrasted regions give the denoiser real edges to preserve
    let regions = 2 + rng.below(3) as usize;
    let mut mask = vec![false; width * height];
    for _ in 0..regions {
        let factor = contrast_factor(rng, 0.3, 3.0);
        stamp_random_shape(&mut values, &mut mask, width, height, factor, 0.08, rng);
    }
    Image::new(width, height, Domain::Reflectivity, values)
}

/// Multiplicative contrast drawn log-uniformly from [lo, hi], re-drawn while
/// it lands too close to 1 to be visible.
fn contrast_factor(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let f = (rng.range(lo.ln(), hi.ln())).exp();
        if !(0.6..=1.67).contains(&f) {
            return f;
        }
    }
}

/// Multiply a random rectangle or disc by `factor`, marking it in `mask`.
/// The shape area is at most `max_area_frac` of the image.
fn stamp_random_shape(
    values: &mut [f64],
    mask: &mut [bool],
    width: usize,
    height: usize,
    factor: f64,
    max_area_frac: f64,
    rng: &mut Rng,
) {
    let max_area = (width * height) as f64 * max_area_frac;
    if rng.below(2) == 0 {
        // rectangle
        let max_side = (max_area.sqrt()).max(4.0);
        let w = rng.range(4.0, max_side) as usize;
        let h = ((max_area / w.max(1) as f64).max(4.0).min(height as f64)) as usize;
        let w = w.clamp(2, width);
        let h = h.clamp(2, height);
        let x0 = rng.below((width - w + 1) as u64) as usize;
        let y0 = rng.below((height - h + 1) as u64) as usize;
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                values[y * width + x] *= factor;
                mask[y * width + x] = true;
            }
        }
    } else {
        // disc
        let max_r = (max_area / std::f64::consts::PI).sqrt().max(3.0);
        let r = rng.range(3.0, max_r);
        let cx = rng.range(0.0, width as f64);
        let cy = rng.range(0.0, height as f64);
        let r2 = r * r;
        let x_lo = (cx - r).floor().max(0.0) as usize;
        let x_hi = ((cx + r).ceil() as usize).min(width - 1);
        let y_lo = (cy - r).floor().max(0.0) as usize;
        let y_hi = ((cy + r).ceil() as usize).min(height - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= r2 {
                    values[y * width + x] *= factor;
                    mask[y * width + x] = true;
                }
            }
        }
    }
}

/// How scene changes between dates are simulated.
#[derive(Debug, Clone, PartialEq)]
pub enum ChangeModel {
    /// All dates share the same underlying reflectivity.
    None,
    /// Per date, multiply random rectangles and discs by strong factors
    /// until roughly `fraction` of the pixels are affected.
    Regions {
        fraction: f64,
        min_factor: f64,
        max_factor: f64,
    },
}

impl ChangeModel {
    pub fn regions(fraction: f64) -> ChangeModel {
        ChangeModel::Regions {
            fraction,
            min_factor: 0.25,
            max_factor: 4.0,
        }
    }
}

/// Apply one date's worth of changes; returns the changed reflectivity and
/// the ground-truth change mask.
fn apply_changes(
    clean: &Image,
    model: &ChangeModel,
    rng: &mut Rng,
) -> Result<(Image, Vec<bool>)> {
    match model {
        ChangeModel::None => Ok((clean.clone(), vec![false; clean.len()])),
        ChangeModel::Regions {
            fraction,
            min_factor,
            max_factor,
        } => {
            let mut values = clean.values().to_vec();
            let mut mask = vec![false; clean.len()];
            let target = (clean.len() as f64 * fraction) as usize;
            let mut guard = 0;
            while mask.iter().filter(|&&m| m).count() < target && guard < 1000 {
                let factor = contrast_factor(rng, *min_factor, *max_factor);
                stamp_random_shape(
                    &mut values,
                    &mut mask,
                    clean.width(),
                    clean.height(),
                    factor,
                    0.02,
                    rng,
                );
                guard += 1;
            }
            let img = Image::new(clean.width(), clean.height(), Domain::Reflectivity, values)?;
            Ok((img, mask))
        }
    }
}

/// Simulate a co-registered stack: each date applies its own region changes
/// to the clean scene, then draws independent (optionally correlated)
/// speckle.
pub fn simulate_time_series(
    clean: &Image,
    dates: usize,
    looks: LooksCount,
    change_model: &ChangeModel,
    kernel: Option<&Kernel>,
    rng: &mut Rng,
) -> Result<TimeSeries> {
    clean.expect_domain(Domain::Reflectivity)?;
    if dates < 2 {
        return Err(crate::Error::InvalidArgument(format!(
            "time series needs at least 2 dates, got {dates}"
        )));
    }
    let mut frames = Vec::with_capacity(dates);
    let mut truths = Vec::with_capacity(dates);
    let mut masks = Vec::with_capacity(dates);
    for _ in 0..dates {
        let (truth, mask) = apply_changes(clean, change_model, rng)?;
        let frame = corrupt(&truth, looks, rng, kernel)?;
        frames.push(frame);
        truths.push(truth);
        masks.push(mask);
    }
    TimeSeries::new(frames, truths, masks)
}
