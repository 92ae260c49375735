//! Evaluation metrics: PSNR on amplitude images with a multi-instance
//! protocol, equivalent number of looks over a homogeneous region, and the
//! 1-D Wasserstein distance between residual speckle and the gamma model.

use crate::image::{Domain, Image};
use crate::special::gamma_quantile;
use crate::speckle::LooksCount;
use crate::{Error, Result};

/// Rectangle (in pixels) over which the ENL is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn validate(&self, img: &Image) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidArgument("region must be nonempty".to_string()));
        }
        if self.x + self.w > img.width() || self.y + self.h > img.height() {
            return Err(Error::InvalidArgument(format!(
                "region {}x{}+{}+{} exceeds image {}x{}",
                self.w,
                self.h,
                self.x,
                self.y,
                img.width(),
                img.height()
            )));
        }
        if self.area() < 100 {
            return Err(Error::InvalidArgument(format!(
                "ENL region needs at least 100 pixels, got {}",
                self.area()
            )));
        }
        Ok(())
    }

    /// Parse "x,y,w,h".
    pub fn parse(s: &str) -> Result<Region> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!(
                "region must be 'x,y,w,h', got '{s}'"
            )));
        }
        let mut vals = [0usize; 4];
        for (i, p) in parts.iter().enumerate() {
            vals[i] = p
                .parse()
                .map_err(|_| Error::Config(format!("bad region component '{p}'")))?;
        }
        Ok(Region {
            x: vals[0],
            y: vals[1],
            w: vals[2],
            h: vals[3],
        })
    }
}

/// Metric bundle produced by the evaluation protocol.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub psnr_mean: f64,
    pub psnr_sigma: f64,
    pub enl: Option<f64>,
    pub wasserstein: Option<f64>,
    pub instances: usize,
}

/// Convert an image to the amplitude domain (square root of intensity or
/// reflectivity).
pub fn to_amplitude(img: &Image) -> Result<Image> {
    match img.domain() {
        Domain::Amplitude => Ok(img.clone()),
        Domain::Intensity | Domain::Reflectivity => {
            img.map(Domain::Amplitude, |v| v.max(0.0).sqrt())
        }
        Domain::LogIntensity => Err(Error::DomainMismatch {
            expected: "intensity, reflectivity or amplitude".to_string(),
            actual: "log_intensity".to_string(),
        }),
    }
}

/// 10 log10(peak^2 / MSE) over amplitude values. A zero MSE yields the
/// +infinity sentinel.
pub fn psnr_amplitude(reference: &Image, estimate: &Image, peak: f64) -> Result<f64> {
    reference.expect_same_shape(estimate)?;
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "PSNR peak must be positive and finite, got {peak}"
        )));
    }
    let ramp = to_amplitude(reference)?;
    let eamp = to_amplitude(estimate)?;
    let mse = ramp
        .values()
        .iter()
        .zip(eamp.values())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / ramp.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean and unbiased standard deviation of a slice.
pub fn mean_sigma(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Equivalent number of looks over a homogeneous region: mean^2 / variance.
pub fn enl(img: &Image, region: &Region) -> Result<f64> {
    img.expect_domain(Domain::Intensity)?;
    region.validate(img)?;
    let patch = img.crop(region.x, region.y, region.w, region.h)?;
    let mean = patch.mean();
    let var = patch.variance();
    if var == 0.0 {
        return Err(Error::Numeric(
            "ENL undefined: region has zero variance".to_string(),
        ));
    }
    Ok(mean * mean / var)
}

/// 1-Wasserstein distance between a sorted empirical sample and a
/// distribution given by its quantile function, evaluated on the plotting
/// positions (rank + 0.5) / n.
pub fn wasserstein_to_quantiles(
    sorted: &[f64],
    mut quantile: impl FnMut(f64, f64) -> f64,
    max_points: usize,
) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "empty sample");
    let points = max_points.max(1).min(n);
    let mut acc = 0.0;
    let mut lo_hint = f64::NEG_INFINITY;
    for i in 0..points {
        // evenly spaced ranks when subsampling, all ranks otherwise
        let rank = if points == n {
            i
        } else {
            (i * n + n / 2) / points
        };
        let p = (rank as f64 + 0.5) / n as f64;
        let q = quantile(p, lo_hint);
        lo_hint = q;
        acc += (sorted[rank] - q).abs();
    }
    acc / points as f64
}

/// Wasserstein distance between samples and the unit-mean gamma speckle law.
pub fn wasserstein_to_gamma(samples: &[f64], looks: LooksCount, max_points: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "wasserstein distance needs samples".to_string(),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let l = looks.get();
    Ok(wasserstein_to_quantiles(
        &sorted,
        |p, hint| {
            let lo = if hint.is_finite() { hint * l } else { 0.0 };
            gamma_quantile(l, p, lo) / l
        },
        max_points,
    ))
}

/// Distance between the residual speckle y / x_hat and the theoretical gamma
/// law. Pixels with a nonpositive estimate are excluded; more than 1%
/// exclusions is an error.
pub fn wasserstein_residual(
    y: &Image,
    xhat: &Image,
    looks: LooksCount,
    max_points: usize,
) -> Result<f64> {
    y.expect_domain(Domain::Intensity)?;
    y.expect_same_shape(xhat)?;
    let mut residuals = Vec::with_capacity(y.len());
    let mut excluded = 0usize;
    for (&yi, &xi) in y.values().iter().zip(xhat.values()) {
        if xi > 0.0 {
            residuals.push(yi / xi);
        } else {
            excluded += 1;
        }
    }
    if excluded * 100 > y.len() {
        return Err(Error::Numeric(format!(
            "wasserstein residual: {excluded} of {} pixels have nonpositive estimates (> 1%)",
            y.len()
        )));
    }
    if residuals.is_empty() {
        return Err(Error::Numeric(
            "wasserstein residual: no valid pixels".to_string(),
        ));
    }
    wasserstein_to_gamma(&residuals, looks, max_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::speckle::{sample_gamma_unit_mean, sample_speckle};

    fn looks(l: f64) -> LooksCount {
        LooksCount::new(l).unwrap()
    }

    #[test]
    fn psnr_identity_is_infinite() {
        let img = Image::constant(8, 8, Domain::Intensity, 4.0).unwrap();
        assert_eq!(psnr_amplitude(&img, &img, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_known_value() {
        // amplitude error 10 everywhere with peak 255: 20 log10(255/10)
        let r = Image::constant(16, 16, Domain::Amplitude, 100.0).unwrap();
        let e = Image::constant(16, 16, Domain::Amplitude, 90.0).unwrap();
        let psnr = psnr_amplitude(&r, &e, 255.0).unwrap();
        let expect = 20.0 * (255.0f64 / 10.0).log10();
        assert!((psnr - expect).abs() < 1e-12, "{psnr} vs {expect}");
        assert!((expect - 28.13).abs() < 0.01);
    }

    #[test]
    fn doubling_mse_costs_three_db() {
        let r = Image::constant(16, 16, Domain::Amplitude, 100.0).unwrap();
        let e1 = Image::constant(16, 16, Domain::Amplitude, 90.0).unwrap();
        let e2 = Image::constant(16, 16, Domain::Amplitude, 100.0 - 10.0 * 2.0f64.sqrt()).unwrap();
        let p1 = psnr_amplitude(&r, &e1, 255.0).unwrap();
        let p2 = psnr_amplitude(&r, &e2, 255.0).unwrap();
        assert!((p1 - p2 - 10.0 * 2.0f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn psnr_symmetric_in_error_sign_and_permutation_invariant() {
        let mut rng = Rng::new(21);
        let vals: Vec<f64> = (0..64).map(|_| rng.range(1.0, 5.0)).collect();
        let errs: Vec<f64> = (0..64).map(|_| rng.range(-0.5, 0.5)).collect();
        let r = Image::new(8, 8, Domain::Amplitude, vals.clone()).unwrap();
        let plus = Image::new(
            8,
            8,
            Domain::Amplitude,
            vals.iter().zip(&errs).map(|(&v, &e)| v + e).collect(),
        )
        .unwrap();
        let minus = Image::new(
            8,
            8,
            Domain::Amplitude,
            vals.iter()
                .zip(&errs)
                .map(|(&v, &e)| (v - e).max(0.0))
                .collect(),
        )
        .unwrap();
        let a = psnr_amplitude(&r, &plus, 5.0).unwrap();
        let b = psnr_amplitude(&r, &minus, 5.0).unwrap();
        assert!((a - b).abs() < 1e-9);
        // joint permutation
        let mut idx: Vec<usize> = (0..64).collect();
        rng.shuffle(&mut idx);
        let rp =
            Image::new(8, 8, Domain::Amplitude, idx.iter().map(|&i| vals[i]).collect()).unwrap();
        let ep = Image::new(
            8,
            8,
            Domain::Amplitude,
            idx.iter().map(|&i| vals[i] + errs[i]).collect(),
        )
        .unwrap();
        let c = psnr_amplitude(&rp, &ep, 5.0).unwrap();
        assert!((a - c).abs() < 1e-9);
    }

    #[test]
    fn enl_of_single_look_speckle_is_one() {
        let mut rng = Rng::new(33);
        let field = sample_speckle(100, 100, looks(1.0), &mut rng, None).unwrap();
        let img = Image::new(100, 100, Domain::Intensity, field.values().to_vec()).unwrap();
        let region = Region {
            x: 0,
            y: 0,
            w: 100,
            h: 100,
        };
        let e = enl(&img, &region).unwrap();
        assert!((e - 1.0).abs() < 0.05, "ENL {e}");
    }

    #[test]
    fn enl_of_temporal_average_grows_linearly() {
        let mut rng = Rng::new(34);
        let n_dates = 8usize;
        let mut acc = vec![0.0f64; 100 * 100];
        for _ in 0..n_dates {
            let f = sample_speckle(100, 100, looks(1.0), &mut rng, None).unwrap();
            for (a, &v) in acc.iter_mut().zip(f.values()) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= n_dates as f64;
        }
        let img = Image::new(100, 100, Domain::Intensity, acc).unwrap();
        let region = Region {
            x: 0,
            y: 0,
            w: 100,
            h: 100,
        };
        let e = enl(&img, &region).unwrap();
        assert!(
            (e - n_dates as f64).abs() < 0.1 * n_dates as f64,
            "ENL {e} expected about {n_dates}"
        );
    }

    #[test]
    fn enl_scale_invariance() {
        let mut rng = Rng::new(35);
        let field = sample_speckle(50, 50, looks(4.0), &mut rng, None).unwrap();
        let img = Image::new(50, 50, Domain::Intensity, field.values().to_vec()).unwrap();
        let scaled = img.map(Domain::Intensity, |v| 7.5 * v).unwrap();
        let region = Region {
            x: 0,
            y: 0,
            w: 50,
            h: 50,
        };
        let a = enl(&img, &region).unwrap();
        let b = enl(&scaled, &region).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn enl_constant_region_is_an_error() {
        let img = Image::constant(20, 20, Domain::Intensity, 3.0).unwrap();
        let region = Region {
            x: 0,
            y: 0,
            w: 20,
            h: 20,
        };
        assert!(matches!(enl(&img, &region), Err(Error::Numeric(_))));
    }

    #[test]
    fn enl_region_validation() {
        let img = Image::constant(20, 20, Domain::Intensity, 3.0).unwrap();
        assert!(enl(
            &img,
            &Region {
                x: 15,
                y: 0,
                w: 10,
                h: 10
            }
        )
        .is_err());
        assert!(enl(
            &img,
            &Region {
                x: 0,
                y: 0,
                w: 9,
                h: 9
            }
        )
        .is_err());
    }

    #[test]
    fn region_parsing() {
        let r = Region::parse("1, 2,30,40").unwrap();
        assert_eq!(
            r,
            Region {
                x: 1,
                y: 2,
                w: 30,
                h: 40
            }
        );
        assert!(Region::parse("1,2,3").is_err());
        assert!(Region::parse("a,b,c,d").is_err());
    }

    #[test]
    fn wasserstein_gamma_self_test() {
        let mut rng = Rng::new(55);
        let n = 100_000;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            samples.push(sample_gamma_unit_mean(looks(1.0), &mut rng));
        }
        let d = wasserstein_to_gamma(&samples, looks(1.0), n).unwrap();
        assert!(d < 0.01, "distance {d}");
    }

    #[test]
    fn wasserstein_zero_on_exact_quantile_grid() {
        let n = 2000;
        let l = looks(2.0);
        let mut grid = Vec::with_capacity(n);
        let mut hint = 0.0;
        for i in 0..n {
            let p = (i as f64 + 0.5) / n as f64;
            let q = gamma_quantile(2.0, p, hint);
            hint = q;
            grid.push(q / 2.0);
        }
        let d = wasserstein_to_gamma(&grid, l, n).unwrap();
        assert!(d < 1e-9, "distance {d}");
    }

    #[test]
    fn wasserstein_translation_property() {
        let mut rng = Rng::new(56);
        let n = 100_000;
        let delta = 0.5;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            samples.push(sample_gamma_unit_mean(looks(1.0), &mut rng) + delta);
        }
        let d = wasserstein_to_gamma(&samples, looks(1.0), n).unwrap();
        assert!((d - delta).abs() < 0.01, "distance {d} vs shift {delta}");
    }

    #[test]
    fn wasserstein_residual_recovers_speckle() {
        let mut rng = Rng::new(57);
        let x = Image::constant(320, 320, Domain::Reflectivity, 2.0).unwrap();
        let y = crate::speckle::corrupt(&x, looks(1.0), &mut rng, None).unwrap();
        let xhat = x.map(Domain::Intensity, |v| v).unwrap();
        let d = wasserstein_residual(&y, &xhat, looks(1.0), usize::MAX).unwrap();
        assert!(d < 0.01, "distance {d}");
    }

    #[test]
    fn wasserstein_residual_excludes_nonpositive_estimates() {
        let y = Image::constant(20, 20, Domain::Intensity, 1.0).unwrap();
        // 2 of 400 pixels nonpositive: fine
        let mut vals = vec![1.0; 400];
        vals[3] = 0.0;
        vals[7] = 0.0;
        let xhat = Image::new(20, 20, Domain::Intensity, vals).unwrap();
        assert!(wasserstein_residual(&y, &xhat, looks(1.0), 400).is_ok());
        // 5% nonpositive: error
        let mut vals = vec![1.0; 400];
        for v in vals.iter_mut().take(20) {
            *v = 0.0;
        }
        let xhat = Image::new(20, 20, Domain::Intensity, vals).unwrap();
        assert!(wasserstein_residual(&y, &xhat, looks(1.0), 400).is_err());
    }

    #[test]
    fn subsampled_wasserstein_close_to_full() {
        let mut rng = Rng::new(58);
        let n = 50_000;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            samples.push(sample_gamma_unit_mean(looks(1.0), &mut rng));
        }
        let full = wasserstein_to_gamma(&samples, looks(1.0), n).unwrap();
        let sub = wasserstein_to_gamma(&samples, looks(1.0), 5_000).unwrap();
        assert!((full - sub).abs() < 0.01, "full {full} vs subsampled {sub}");
    }
}
