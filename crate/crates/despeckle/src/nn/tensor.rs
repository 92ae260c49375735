//! Minimal dense 4-D tensor (batch, channels, height, width) in f64.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        Tensor {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != n * c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "tensor ({n},{c},{h},{w}) needs {} values, got {}",
                n * c * h * w,
                data.len()
            )));
        }
        Ok(Tensor { n, c, h, w, data })
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.n == other.n && self.c == other.c && self.h == other.h && self.w == other.w
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    /// Slice holding one (batch, channel) plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let stride = self.h * self.w;
        let base = (n * self.c + c) * stride;
        &self.data[base..base + stride]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let stride = self.h * self.w;
        let base = (n * self.c + c) * stride;
        &mut self.data[base..base + stride]
    }

    /// Slice holding all channels of one batch item.
    pub fn item(&self, n: usize) -> &[f64] {
        let stride = self.c * self.h * self.w;
        &self.data[n * stride..(n + 1) * stride]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [f64] {
        let stride = self.c * self.h * self.w;
        &mut self.data[n * stride..(n + 1) * stride]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
