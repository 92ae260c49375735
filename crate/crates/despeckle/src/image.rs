//! The 2-D image type shared by every module: a row-major grid of real
//! values with an explicit domain tag.

use crate::{Error, Result};

/// What the pixel values of an [`Image`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    Reflectivity,
    Intensity,
    Amplitude,
    LogIntensity,
}

impl Domain {
    /// Stable on-disk tag, part of the image file format.
    pub fn tag(self) -> u8 {
        match self {
            Domain::Reflectivity => 0,
            Domain::Intensity => 1,
            Domain::Amplitude => 2,
            Domain::LogIntensity => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Domain> {
        match tag {
            0 => Some(Domain::Reflectivity),
            1 => Some(Domain::Intensity),
            2 => Some(Domain::Amplitude),
            3 => Some(Domain::LogIntensity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Reflectivity => "reflectivity",
            Domain::Intensity => "intensity",
            Domain::Amplitude => "amplitude",
            Domain::LogIntensity => "log_intensity",
        }
    }

    /// Nonnegativity applies to all physical domains; log-intensity may be
    /// any finite real.
    fn requires_nonnegative(self) -> bool {
        !matches!(self, Domain::LogIntensity)
    }
}

/// Row-major 2-D grid of f64 values with a domain tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    domain: Domain,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, domain: Domain, values: Vec<f64>) -> Result<Image> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "image {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite pixel value {v} at index {i}"
                )));
            }
            if v < 0.0 && domain.requires_nonnegative() {
                return Err(Error::InvalidArgument(format!(
                    "negative value {v} at index {i} in {} image",
                    domain.name()
                )));
            }
        }
        Ok(Image {
            width,
            height,
            domain,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, domain: Domain, value: f64) -> Result<Image> {
        Image::new(width, height, domain, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(Error::DomainMismatch {
                expected: domain.name().to_string(),
                actual: self.domain.name().to_string(),
            });
        }
        Ok(())
    }

    pub fn expect_same_shape(&self, other: &Image) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Copy of the rectangle with top-left corner (x0, y0).
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds image {}x{}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            values.extend_from_slice(&self.values[y * self.width + x0..y * self.width + x0 + w]);
        }
        Image::new(w, h, self.domain, values)
    }

    /// New image with the same shape, values produced pixelwise.
    pub fn map(&self, domain: Domain, f: impl Fn(f64) -> f64) -> Result<Image> {
        Image::new(
            self.width,
            self.height,
            domain,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.mean();
        self.values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(Image::new(3, 2, Domain::Intensity, vec![0.0; 5]).is_err());
    }

    #[test]
    fn rejects_negative_intensity() {
        assert!(Image::new(2, 1, Domain::Intensity, vec![1.0, -0.5]).is_err());
        assert!(Image::new(2, 1, Domain::LogIntensity, vec![1.0, -0.5]).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Image::new(2, 1, Domain::Intensity, vec![1.0, f64::NAN]).is_err());
        assert!(Image::new(2, 1, Domain::LogIntensity, vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn crop_extracts_rectangle() {
        let img = Image::new(4, 3, Domain::Intensity, (0..12).map(|v| v as f64).collect()).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.values(), &[5.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn domain_tags_round_trip() {
        for d in [
            Domain::Reflectivity,
            Domain::Intensity,
            Domain::Amplitude,
            Domain::LogIntensity,
        ] {
            assert_eq!(Domain::from_tag(d.tag()), Some(d));
        }
        assert_eq!(Domain::from_tag(4), None);
    }
}
