//! Layer primitives with hand-written forward and backward passes:
//! 3x3 convolution with reflection padding (via im2col and a small GEMM),
//! leaky rectifier, 2x2 max pooling, nearest-neighbor upsampling and channel
//! concatenation.
//!
//! All loops run in a fixed order, so every result is bit-reproducible.

use super::tensor::Tensor;
use crate::rng::Rng;

/// Weights of one convolution. `weight` is laid out (out_c, in_c * k * k)
/// row-major, matching the im2col patch layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_c: usize, out_c: usize, k: usize) -> Conv2d {
        Conv2d {
            in_c,
            out_c,
            k,
            weight: vec![0.0; out_c * in_c * k * k],
            bias: vec![0.0; out_c],
        }
    }

    /// He-style fan-in initialization; biases stay zero.
    pub fn he_init(in_c: usize, out_c: usize, k: usize, rng: &mut Rng) -> Conv2d {
        let fan_in = (in_c * k * k) as f64;
        let std = (2.0 / fan_in).sqrt();
        let mut conv = Conv2d::zeros(in_c, out_c, k);
        for w in conv.weight.iter_mut() {
            *w = rng.normal() * std;
        }
        conv
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Mirror index for reflection padding (reflect about the border pixel,
/// without repeating it). Collapses to clamping for a 1-pixel axis.
#[inline]
fn reflect(idx: isize, size: usize) -> usize {
    let size = size as isize;
    if size == 1 {
        return 0;
    }
    let mut i = idx;
    if i < 0 {
        i = -i;
    }
    if i >= size {
        i = 2 * size - 2 - i;
    }
    debug_assert!(i >= 0 && i < size);
    i as usize
}

/// im2col with reflection padding: column r = (c*k + dy)*k + dx holds the
/// input value at (reflect(y+dy-p), reflect(x+dx-p)) for every output pixel.
fn im2col(input: &[f64], in_c: usize, h: usize, w: usize, k: usize, col: &mut [f64]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    debug_assert_eq!(col.len(), in_c * k * k * hw);
    // reflection lookup tables per axis
    let mut ry = vec![0usize; h * k];
    for y in 0..h {
        for dy in 0..k {
            ry[y * k + dy] = reflect(y as isize + dy as isize - pad, h);
        }
    }
    let mut rx = vec![0usize; w * k];
    for x in 0..w {
        for dx in 0..k {
            rx[x * k + dx] = reflect(x as isize + dx as isize - pad, w);
        }
    }
    for c in 0..in_c {
        let src = &input[c * hw..(c + 1) * hw];
        for dy in 0..k {
            for dx in 0..k {
                let row = (c * k + dy) * k + dx;
                let dst = &mut col[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let sy = ry[y * k + dy];
                    let src_row = &src[sy * w..(sy + 1) * w];
                    let dst_row = &mut dst[y * w..(y + 1) * w];
                    for x in 0..w {
                        dst_row[x] = src_row[rx[x * k + dx]];
                    }
                }
            }
        }
    }
}

/// Scatter-add of a column matrix back to the input layout; adjoint of
/// [`im2col`].
fn col2im(col: &[f64], in_c: usize, h: usize, w: usize, k: usize, grad_input: &mut [f64]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for c in 0..in_c {
        let dst = &mut grad_input[c * hw..(c + 1) * hw];
        for dy in 0..k {
            for dx in 0..k {
                let row = (c * k + dy) * k + dx;
                let src = &col[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let sy = reflect(y as isize + dy as isize - pad, h);
                    for x in 0..w {
                        let sx = reflect(x as isize + dx as isize - pad, w);
                        dst[sy * w + sx] += src[y * w + x];
                    }
                }
            }
        }
    }
}

/// c[m x n] += a[m x p] * b[p x n], all row-major.
fn gemm_acc(m: usize, p: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * p);
    debug_assert_eq!(b.len(), p * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for l in 0..p {
            let av = a[i * p + l];
            if av == 0.0 {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
}

/// c[m x p] += a[m x n] * b[p x n]^T (rows of both operands are contiguous).
fn gemm_abt_acc(m: usize, n: usize, p: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), p * n);
    debug_assert_eq!(c.len(), m * p);
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..p {
            let brow = &b[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for l in 0..n {
                acc += arow[l] * brow[l];
            }
            c[i * p + j] += acc;
        }
    }
}

/// Same-size convolution with reflection padding.
pub fn conv_forward(conv: &Conv2d, input: &Tensor) -> Tensor {
    assert_eq!(input.c, conv.in_c, "conv input channels");
    let (n, _, h, w) = input.shape();
    let hw = h * w;
    let kk = conv.in_c * conv.k * conv.k;
    let mut out = Tensor::zeros(n, conv.out_c, h, w);
    let mut col = vec![0.0; kk * hw];
    for item in 0..n {
        im2col(input.item(item), conv.in_c, h, w, conv.k, &mut col);
        let dst = out.item_mut(item);
        for (o, &b) in conv.bias.iter().enumerate() {
            dst[o * hw..(o + 1) * hw].fill(b);
        }
        gemm_acc(conv.out_c, kk, hw, &conv.weight, &col, dst);
    }
    out
}

/// Gradients of a convolution: returns grad wrt input and accumulates the
/// weight and bias gradients into `grad_w` / `grad_b`.
pub fn conv_backward(
    conv: &Conv2d,
    input: &Tensor,
    grad_out: &Tensor,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Tensor {
    let (n, _, h, w) = input.shape();
    let hw = h * w;
    let kk = conv.in_c * conv.k * conv.k;
    debug_assert_eq!(grad_out.c, conv.out_c);
    let mut grad_input = Tensor::zeros(n, conv.in_c, h, w);
    let mut col = vec![0.0; kk * hw];
    let mut grad_col = vec![0.0; kk * hw];
    for item in 0..n {
        let go = grad_out.item(item);
        for o in 0..conv.out_c {
            grad_b[o] += go[o * hw..(o + 1) * hw].iter().sum::<f64>();
        }
        im2col(input.item(item), conv.in_c, h, w, conv.k, &mut col);
        // dW += dOut * col^T
        gemm_abt_acc(conv.out_c, hw, kk, go, &col, grad_w);
        // dcol = W^T * dOut
        grad_col.fill(0.0);
        for o in 0..conv.out_c {
            let gorow = &go[o * hw..(o + 1) * hw];
            for r in 0..kk {
                let wv = conv.weight[o * kk + r];
                if wv == 0.0 {
                    continue;
                }
                let gcrow = &mut grad_col[r * hw..(r + 1) * hw];
                for j in 0..hw {
                    gcrow[j] += wv * gorow[j];
                }
            }
        }
        col2im(
            &grad_col,
            conv.in_c,
            h,
            w,
            conv.k,
            grad_input.item_mut(item),
        );
    }
    grad_input
}

/// Leaky rectifier, elementwise.
pub fn leaky_relu_forward(input: &Tensor, slope: f64) -> Tensor {
    let mut out = input.clone();
    for v in out.data.iter_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

/// Backward pass of the leaky rectifier. The output sign carries the branch
/// (the rectifier preserves sign for positive slopes), so only the forward
/// output needs to be cached.
pub fn leaky_relu_backward(output: &Tensor, grad_out: &Tensor, slope: f64) -> Tensor {
    debug_assert!(output.same_shape(grad_out));
    let mut grad = grad_out.clone();
    for (g, &o) in grad.data.iter_mut().zip(&output.data) {
        if o <= 0.0 {
            *g *= slope;
        }
    }
    grad
}

/// 2x2 max pooling with stride 2. Returns the pooled tensor and the flat
/// input index of each maximum for the backward pass.
pub fn maxpool_forward(input: &Tensor) -> (Tensor, Vec<u32>) {
    let (n, c, h, w) = input.shape();
    assert!(h % 2 == 0 && w % 2 == 0, "pooling needs even dimensions");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(n, c, oh, ow);
    let mut argmax = vec![0u32; n * c * oh * ow];
    let mut oi = 0usize;
    for item in 0..n {
        for ch in 0..c {
            let plane = input.plane(item, ch);
            let oplane = out.plane_mut(item, ch);
            for y in 0..oh {
                for x in 0..ow {
                    let base = (2 * y) * w + 2 * x;
                    let idx4 = [base, base + 1, base + w, base + w + 1];
                    let mut best = idx4[0];
                    let mut bv = plane[idx4[0]];
                    for &i in &idx4[1..] {
                        if plane[i] > bv {
                            bv = plane[i];
                            best = i;
                        }
                    }
                    oplane[y * ow + x] = bv;
                    argmax[oi] = best as u32;
                    oi += 1;
                }
            }
        }
    }
    (out, argmax)
}

/// Scatter the pooled gradient back to the argmax positions.
pub fn maxpool_backward(
    grad_out: &Tensor,
    argmax: &[u32],
    in_h: usize,
    in_w: usize,
) -> Tensor {
    let (n, c, oh, ow) = grad_out.shape();
    let mut grad_in = Tensor::zeros(n, c, in_h, in_w);
    let mut oi = 0usize;
    for item in 0..n {
        for ch in 0..c {
            let gplane = grad_out.plane(item, ch);
            let iplane = grad_in.plane_mut(item, ch);
            for i in 0..oh * ow {
                iplane[argmax[oi] as usize] += gplane[i];
                oi += 1;
            }
        }
    }
    grad_in
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample_forward(input: &Tensor) -> Tensor {
    let (n, c, h, w) = input.shape();
    let mut out = Tensor::zeros(n, c, 2 * h, 2 * w);
    for item in 0..n {
        for ch in 0..c {
            let src = input.plane(item, ch);
            let dst = out.plane_mut(item, ch);
            for y in 0..h {
                for x in 0..w {
                    let v = src[y * w + x];
                    let base = (2 * y) * (2 * w) + 2 * x;
                    dst[base] = v;
                    dst[base + 1] = v;
                    dst[base + 2 * w] = v;
                    dst[base + 2 * w + 1] = v;
                }
            }
        }
    }
    out
}

/// Adjoint of nearest upsampling: sum each 2x2 block.
pub fn upsample_backward(grad_out: &Tensor) -> Tensor {
    let (n, c, h2, w2) = grad_out.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut grad_in = Tensor::zeros(n, c, h, w);
    for item in 0..n {
        for ch in 0..c {
            let src = grad_out.plane(item, ch);
            let dst = grad_in.plane_mut(item, ch);
            for y in 0..h {
                for x in 0..w {
                    let base = (2 * y) * w2 + 2 * x;
                    dst[y * w + x] = src[base] + src[base + 1] + src[base + w2] + src[base + w2 + 1];
                }
            }
        }
    }
    grad_in
}

/// Concatenate along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Tensor {
    assert!(a.n == b.n && a.h == b.h && a.w == b.w, "concat shape");
    let mut out = Tensor::zeros(a.n, a.c + b.c, a.h, a.w);
    for item in 0..a.n {
        let (sa, sb) = (a.item(item), b.item(item));
        let dst = out.item_mut(item);
        dst[..sa.len()].copy_from_slice(sa);
        dst[sa.len()..].copy_from_slice(sb);
    }
    out
}

/// Split a channel-concatenated gradient back into its two parts.
pub fn split_channels(grad: &Tensor, c_first: usize) -> (Tensor, Tensor) {
    let (n, c, h, w) = grad.shape();
    assert!(c_first < c);
    let mut a = Tensor::zeros(n, c_first, h, w);
    let mut b = Tensor::zeros(n, c - c_first, h, w);
    for item in 0..n {
        let src = grad.item(item);
        let alen = c_first * h * w;
        a.item_mut(item).copy_from_slice(&src[..alen]);
        b.item_mut(item).copy_from_slice(&src[alen..]);
    }
    (a, b)
}
