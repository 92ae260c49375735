//! Inference paths: plain restoration, subsampled pre-estimates for change
//! compensation, and overlap-blended tiling for images larger than one
//! forward pass should handle.

use crate::image::{Domain, Image};
use crate::nn::{forward, NetworkParams, Tensor};
use crate::speckle::log_transform;
use crate::{Error, Result};

/// Restored scene in both output domains.
#[derive(Debug, Clone)]
pub struct DespeckleOutput {
    pub intensity: Image,
    pub amplitude: Image,
}

/// Mirror index with period 2(size-1); valid for any padding amount.
fn mirror(idx: usize, size: usize) -> usize {
    if size <= 1 {
        return 0;
    }
    let period = 2 * size - 2;
    let m = idx % period;
    if m < size {
        m
    } else {
        period - m
    }
}

/// Reflect-pad a log image on the right and bottom to multiples of `div`.
fn pad_to_multiple(values: &[f64], width: usize, height: usize, div: usize) -> (Vec<f64>, usize, usize) {
    let pw = width.div_ceil(div) * div;
    let ph = height.div_ceil(div) * div;
    if pw == width && ph == height {
        return (values.to_vec(), width, height);
    }
    let mut out = vec![0.0; pw * ph];
    for y in 0..ph {
        let sy = mirror(y, height);
        for x in 0..pw {
            out[y * pw + x] = values[sy * width + mirror(x, width)];
        }
    }
    (out, pw, ph)
}

/// Run the network over one full log-intensity image, padding and cropping
/// as needed. Input and output stay in the log domain.
pub fn forward_log_image(params: &NetworkParams, log_img: &Image) -> Result<Image> {
    log_img.expect_domain(Domain::LogIntensity)?;
    let div = params.config.divisor();
    let (padded, pw, ph) = pad_to_multiple(log_img.values(), log_img.width(), log_img.height(), div);
    let input = Tensor::from_vec(1, 1, ph, pw, padded)?;
    let (out, _) = forward(params, &input)?;
    if !out.is_finite() {
        return Err(Error::Numeric(
            "network produced non-finite values; checkpoint may be untrained or corrupt"
                .to_string(),
        ));
    }
    let mut values = Vec::with_capacity(log_img.len());
    for y in 0..log_img.height() {
        values.extend_from_slice(&out.data[y * pw..y * pw + log_img.width()]);
    }
    Image::new(log_img.width(), log_img.height(), Domain::LogIntensity, values)
}

/// Restore an intensity image: log, forward, exp. The amplitude output is
/// the square root of the restored intensity.
pub fn despeckle_image(params: &NetworkParams, y: &Image, log_floor: f64) -> Result<DespeckleOutput> {
    let ylog = log_transform(y, log_floor)?;
    let out_log = forward_log_image(params, &ylog)?;
    let intensity = out_log.map(Domain::Intensity, f64::exp)?;
    let amplitude = out_log.map(Domain::Amplitude, |v| (0.5 * v).exp())?;
    Ok(DespeckleOutput { intensity, amplitude })
}

/// Pre-estimate for change compensation: subsample by `factor` to loosen the
/// spatial correlation, restore, and interpolate back to full size.
/// Returns a log-intensity image. Factor 1 is plain inference.
pub fn pre_estimate(
    params: &NetworkParams,
    y: &Image,
    factor: usize,
    log_floor: f64,
) -> Result<Image> {
    y.expect_domain(Domain::Intensity)?;
    if factor == 0 {
        return Err(Error::InvalidArgument("subsample factor must be >= 1".to_string()));
    }
    if factor > y.width() || factor > y.height() {
        return Err(Error::InvalidArgument(format!(
            "subsample factor {factor} larger than image {}x{}",
            y.width(),
            y.height()
        )));
    }
    let sw = y.width().div_ceil(factor);
    let sh = y.height().div_ceil(factor);
    let mut sub = Vec::with_capacity(sw * sh);
    for sy in 0..sh {
        for sx in 0..sw {
            sub.push(y.get(sx * factor, sy * factor));
        }
    }
    let sub_img = Image::new(sw, sh, Domain::Intensity, sub)?;
    let sub_log = log_transform(&sub_img, log_floor)?;
    let restored = forward_log_image(params, &sub_log)?;
    if factor == 1 {
        return Ok(restored);
    }
    // bilinear interpolation back to the original grid; sample i sits at
    // original coordinate i * factor
    let mut values = Vec::with_capacity(y.len());
    let fx = 1.0 / factor as f64;
    for yy in 0..y.height() {
        let v = yy as f64 * fx;
        let y0 = (v.floor() as usize).min(sh - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let wy = (v - y0 as f64).clamp(0.0, 1.0);
        for xx in 0..y.width() {
            let u = xx as f64 * fx;
            let x0 = (u.floor() as usize).min(sw - 1);
            let x1 = (x0 + 1).min(sw - 1);
            let wx = (u - x0 as f64).clamp(0.0, 1.0);
            let a = restored.get(x0, y0);
            let b = restored.get(x1, y0);
            let c = restored.get(x0, y1);
            let d = restored.get(x1, y1);
            values.push(a * (1.0 - wx) * (1.0 - wy) + b * wx * (1.0 - wy) + c * (1.0 - wx) * wy + d * wx * wy);
        }
    }
    Image::new(y.width(), y.height(), Domain::LogIntensity, values)
}

/// Overlap weight along one axis inside a tile placed at `origin` with the
/// given margins; zero inside the discard margin, cosine ramp across the
/// blend zone, one in the core.
fn axis_weight(
    pos_in_tile: usize,
    tile: usize,
    margin_lo: usize,
    margin_hi: usize,
    blend: usize,
) -> f64 {
    if pos_in_tile < margin_lo || pos_in_tile >= tile - margin_hi {
        return 0.0;
    }
    let ramp = |d: usize| {
        0.5 * (1.0 - (std::f64::consts::PI * (d as f64 + 1.0) / (blend as f64 + 1.0)).cos())
    };
    let mut w = 1.0f64;
    if margin_lo > 0 {
        let d = pos_in_tile - margin_lo;
        if d < blend {
            w = w.min(ramp(d));
        }
    }
    if margin_hi > 0 {
        let d = tile - margin_hi - 1 - pos_in_tile;
        if d < blend {
            w = w.min(ramp(d));
        }
    }
    w
}

/// Tile start coordinates, aligned to `align`, covering [0, size].
fn tile_origins(size: usize, tile: usize, step: usize, align: usize) -> Vec<usize> {
    let mut origins = Vec::new();
    let last = size - tile;
    let mut x = 0;
    loop {
        if x >= last {
            origins.push(last);
            break;
        }
        origins.push(x);
        x += step;
    }
    debug_assert!(origins.iter().all(|&o| o % align == 0));
    origins
}

/// Restore a large intensity image by overlapping tiles with cosine-ramp
/// blending. Each tile discards a margin wider than the network's receptive
/// field, so away from image borders the blended result matches the untiled
/// forward pass.
pub fn despeckle_tiled(
    params: &NetworkParams,
    y: &Image,
    log_floor: f64,
    tile: usize,
) -> Result<DespeckleOutput> {
    let div = params.config.divisor();
    if tile % div != 0 {
        return Err(Error::InvalidArgument(format!(
            "tile size {tile} must be divisible by 2^depth = {div}"
        )));
    }
    let margin = params.config.receptive_field_radius().div_ceil(div) * div;
    let blend = div.max(8);
    if tile <= 2 * margin + blend {
        return Err(Error::InvalidArgument(format!(
            "tile size {tile} too small for margin {margin} and blend {blend}"
        )));
    }
    let ylog = log_transform(y, log_floor)?;
    let (padded, pw, ph) = pad_to_multiple(ylog.values(), ylog.width(), ylog.height(), div);
    if pw <= tile && ph <= tile {
        // fits in one pass
        let out = forward_log_image(params, &ylog)?;
        let intensity = out.map(Domain::Intensity, f64::exp)?;
        let amplitude = out.map(Domain::Amplitude, |v| (0.5 * v).exp())?;
        return Ok(DespeckleOutput { intensity, amplitude });
    }
    let step = ((tile - 2 * margin - blend) / div) * div;
    let xs = if pw <= tile { vec![0] } else { tile_origins(pw, tile, step, div) };
    let ys = if ph <= tile { vec![0] } else { tile_origins(ph, tile, step, div) };
    let tw = tile.min(pw);
    let th = tile.min(ph);
    let mut num = vec![0.0f64; pw * ph];
    let mut den = vec![0.0f64; pw * ph];
    for &y0 in &ys {
        for &x0 in &xs {
            let mut tile_vals = Vec::with_capacity(tw * th);
            for yy in 0..th {
                let row = (y0 + yy) * pw + x0;
                tile_vals.extend_from_slice(&padded[row..row + tw]);
            }
            let input = Tensor::from_vec(1, 1, th, tw, tile_vals)?;
            let (out, _) = forward(params, &input)?;
            if !out.is_finite() {
                return Err(Error::Numeric("network produced non-finite values".to_string()));
            }
            let ml_x = if x0 == 0 { 0 } else { margin };
            let mh_x = if x0 + tw == pw { 0 } else { margin };
            let ml_y = if y0 == 0 { 0 } else { margin };
            let mh_y = if y0 + th == ph { 0 } else { margin };
            for yy in 0..th {
                let wy = axis_weight(yy, th, ml_y, mh_y, blend);
                if wy == 0.0 {
                    continue;
                }
                for xx in 0..tw {
                    let wx = axis_weight(xx, tw, ml_x, mh_x, blend);
                    if wx == 0.0 {
                        continue;
                    }
                    let w = wx * wy;
                    let gi = (y0 + yy) * pw + (x0 + xx);
                    num[gi] += w * out.data[yy * tw + xx];
                    den[gi] += w;
                }
            }
        }
    }
    let mut values = Vec::with_capacity(y.len());
    for yy in 0..y.height() {
        for xx in 0..y.width() {
            let gi = yy * pw + xx;
            debug_assert!(den[gi] > 0.0, "uncovered pixel ({xx},{yy})");
            values.push(num[gi] / den[gi]);
        }
    }
    let out_log = Image::new(y.width(), y.height(), Domain::LogIntensity, values)?;
    let intensity = out_log.map(Domain::Intensity, f64::exp)?;
    let amplitude = out_log.map(Domain::Amplitude, |v| (0.5 * v).exp())?;
    Ok(DespeckleOutput { intensity, amplitude })
}
