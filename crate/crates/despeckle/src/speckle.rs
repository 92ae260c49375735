//! Fully developed multiplicative speckle and its log-domain statistics.
//!
//! Intensity speckle S follows a gamma distribution with unit mean and
//! variance 1/L, where L is the number of looks. In the log domain the
//! speckle becomes additive with a Fisher-Tippett distribution whose mean
//! psi(L) - ln L is not zero; that bias constant is what the debiased l2
//! loss compensates.

use crate::image::{Domain, Image};
use crate::rng::Rng;
use crate::special::{digamma, ln_gamma, trigamma};
use crate::{Error, Result};

/// Number of looks L >= 1; the single parameter of the speckle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooksCount(f64);

impl LooksCount {
    pub fn new(looks: f64) -> Result<LooksCount> {
        if !looks.is_finite() || looks < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "looks count must be finite and >= 1, got {looks}"
            )));
        }
        Ok(LooksCount(looks))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Some(n) when L is an integer (within 1e-9), which selects the exact
    /// sum-of-exponentials sampler.
    pub fn as_integer(self) -> Option<u32> {
        let rounded = self.0.round();
        if (self.0 - rounded).abs() < 1e-9 && rounded >= 1.0 && rounded <= u32::MAX as f64 {
            Some(rounded as u32)
        } else {
            None
        }
    }
}

/// Small convolution kernel used to correlate the complex field before
/// detection. Taps are normalized to unit energy internally so correlated
/// speckle keeps unit mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, taps: Vec<f64>) -> Result<Kernel> {
        if width == 0 || height == 0 || taps.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "kernel {width}x{height} needs {} taps, got {}",
                width * height,
                taps.len()
            )));
        }
        let energy: f64 = taps.iter().map(|t| t * t).sum();
        if !energy.is_finite() || energy <= 0.0 {
            return Err(Error::InvalidArgument(
                "kernel taps must have positive finite energy".to_string(),
            ));
        }
        let norm = energy.sqrt();
        Ok(Kernel {
            width,
            height,
            taps: taps.into_iter().map(|t| t / norm).collect(),
        })
    }

    /// Separable Gaussian kernel of odd size.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Kernel> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "gaussian kernel size must be odd, got {size}"
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let c = (size / 2) as f64;
        let mut taps = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
                taps.push((-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
        Kernel::new(size, size, taps)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// A realization of the speckle process: positive values with unit mean.
#[derive(Debug, Clone)]
pub struct SpeckleField {
    width: usize,
    height: usize,
    looks: LooksCount,
    values: Vec<f64>,
    kernel: Option<Kernel>,
}

impl SpeckleField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn looks(&self) -> LooksCount {
        self.looks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }
}

/// One gamma draw with shape L and unit mean.
///
/// Integer shapes use the exact sum of L unit exponentials; non-integer
/// shapes use the Marsaglia-Tsang squeeze method. Both are divided by L to
/// move from unit rate to unit mean.
pub fn sample_gamma_unit_mean(looks: LooksCount, rng: &mut Rng) -> f64 {
    let l = looks.get();
    if let Some(n) = looks.as_integer() {
        let mut acc = 0.0;
        for _ in 0..n {
            acc -= rng.uniform_pos().ln();
        }
        return acc / l;
    }
    // Marsaglia-Tsang for shape >= 1.
    let d = l - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.normal();
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.uniform_pos();
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v / l;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v / l;
        }
    }
}

/// Draw a speckle field of the given size.
///
/// Without a kernel, pixels are independent gamma draws. With a kernel, each
/// look is the squared modulus of an i.i.d. complex circular Gaussian field
/// convolved (circularly) with the kernel, and looks are averaged in
/// intensity; marginals stay gamma with unit mean while neighboring pixels
/// become correlated. The correlated path requires an integer looks count.
pub fn sample_speckle(
    width: usize,
    height: usize,
    looks: LooksCount,
    rng: &mut Rng,
    kernel: Option<&Kernel>,
) -> Result<SpeckleField> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "field dimensions must be positive, got {width}x{height}"
        )));
    }
    let values = match kernel {
        None => {
            let mut v = Vec::with_capacity(width * height);
            for _ in 0..width * height {
                v.push(sample_gamma_unit_mean(looks, rng));
            }
            v
        }
        Some(k) => {
            if k.width > width || k.height > height {
                return Err(Error::InvalidArgument(format!(
                    "kernel {}x{} larger than field {width}x{height}",
                    k.width, k.height
                )));
            }
            let n_looks = looks.as_integer().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "correlated speckle requires an integer looks count, got {}",
                    looks.get()
                ))
            })?;
            sample_correlated(width, height, n_looks, k, rng)
        }
    };
    Ok(SpeckleField {
        width,
        height,
        looks,
        values,
        kernel: kernel.cloned(),
    })
}

fn sample_correlated(
    width: usize,
    height: usize,
    n_looks: u32,
    kernel: &Kernel,
    rng: &mut Rng,
) -> Vec<f64> {
    let n = width * height;
    let mut intensity = vec![0.0f64; n];
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let kcx = (kernel.width / 2) as isize;
    let kcy = (kernel.height / 2) as isize;
    let mut re = vec![0.0f64; n];
    let mut im = vec![0.0f64; n];
    for _ in 0..n_looks {
        // i.i.d. complex circular Gaussian with E|g|^2 = 1
        for i in 0..n {
            re[i] = rng.normal() * half;
            im[i] = rng.normal() * half;
        }
        // circular convolution keeps the field stationary
        for y in 0..height as isize {
            for x in 0..width as isize {
                let mut hr = 0.0;
                let mut hi = 0.0;
                for ky in 0..kernel.height as isize {
                    let sy = (y + ky - kcy).rem_euclid(height as isize) as usize;
                    for kx in 0..kernel.width as isize {
                        let sx = (x + kx - kcx).rem_euclid(width as isize) as usize;
                        let t = kernel.taps[(ky * kernel.width as isize + kx) as usize];
                        hr += t * re[sy * width + sx];
                        hi += t * im[sy * width + sx];
                    }
                }
                intensity[(y * width as isize + x) as usize] += hr * hr + hi * hi;
            }
        }
    }
    let inv = 1.0 / n_looks as f64;
    intensity.iter_mut().for_each(|v| *v *= inv);
    intensity
}

/// Multiply a reflectivity image by a fresh speckle field: the observed
/// intensity. Independent rng streams give conditionally independent
/// realizations of the same scene.
pub fn corrupt(
    x: &Image,
    looks: LooksCount,
    rng: &mut Rng,
    kernel: Option<&Kernel>,
) -> Result<Image> {
    x.expect_domain(Domain::Reflectivity)?;
    let field = sample_speckle(x.width(), x.height(), looks, rng, kernel)?;
    let values = x
        .values()
        .iter()
        .zip(field.values())
        .map(|(&xi, &si)| xi * si)
        .collect();
    Image::new(x.width(), x.height(), Domain::Intensity, values)
}

/// Natural log of max(y, floor), pixelwise. The floor keeps zero pixels
/// inside the log domain.
pub fn log_transform(y: &Image, floor: f64) -> Result<Image> {
    y.expect_domain(Domain::Intensity)?;
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "log floor must be positive and finite, got {floor}"
        )));
    }
    y.map(Domain::LogIntensity, |v| v.max(floor).ln())
}

/// Default clamp applied before the log transform.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-10;

/// Log-density of the log-domain speckle (Fisher-Tippett):
/// ln p(s) = L ln L - ln Gamma(L) + L s - L e^s.
pub fn fisher_tippett_logpdf(s: f64, looks: LooksCount) -> f64 {
    let l = looks.get();
    l * l.ln() - ln_gamma(l) + l * s - l * s.exp()
}

/// Mean of the log-domain speckle: psi(L) - ln L. This is the debiasing
/// constant for averaging log intensities.
pub fn log_speckle_bias(looks: LooksCount) -> f64 {
    let l = looks.get();
    digamma(l) - l.ln()
}

/// Variance of the log-domain speckle: trigamma(L). Stationary across the
/// image, independent of the reflectivity.
pub fn log_speckle_var(looks: LooksCount) -> f64 {
    trigamma(looks.get())
}

/// Quantile of the log-domain speckle distribution, via the gamma quantile.
pub fn fisher_tippett_quantile(p: f64, looks: LooksCount, lo_hint: f64) -> f64 {
    let l = looks.get();
    let g = crate::special::gamma_quantile(l, p, if lo_hint.is_finite() { lo_hint.exp() * l } else { 0.0 });
    (g / l).max(f64::MIN_POSITIVE).ln()
}
