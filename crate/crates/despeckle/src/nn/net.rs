//! The compact encoder-decoder denoiser with skip connections, wired as a
//! residual network: the convolutional stack predicts the noise, which is
//! subtracted from the input to give the restored log image.

use super::layers::{
    concat_channels, conv_backward, conv_forward, leaky_relu_backward, leaky_relu_forward,
    maxpool_backward, maxpool_forward, split_channels, upsample_backward, upsample_forward,
    Conv2d,
};
use super::tensor::Tensor;
use crate::rng::Rng;
use crate::{Error, Result};

/// Architecture of the denoiser. `channels` has one entry per level; the
/// desk-scale default is two levels of 16 and 32 channels (~60k parameters).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkConfig {
    pub depth: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub leaky_slope: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            depth: 2,
            channels: vec![16, 32],
            kernel: 3,
            leaky_slope: 0.1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("network depth must be >= 1".to_string()));
        }
        if self.channels.len() != self.depth {
            return Err(Error::Config(format!(
                "need one channel count per level: depth {} vs {} channel entries",
                self.depth,
                self.channels.len()
            )));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::Config("channel counts must be positive".to_string()));
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::Config(format!(
                "kernel size must be odd, got {}",
                self.kernel
            )));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config(format!(
                "leaky slope must lie in (0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }

    /// Spatial sizes must be divisible by this before entering the network.
    pub fn divisor(&self) -> usize {
        1 << self.depth
    }

    /// Radius (in input pixels) of the output receptive field; used to size
    /// the discard margin of tiled inference.
    pub fn receptive_field_radius(&self) -> usize {
        let half_k = self.kernel / 2;
        let mut twice_r = 0usize; // accumulate in half-pixels
        let mut jump = 1usize;
        for _ in 0..self.depth {
            twice_r += 2 * 2 * half_k * jump; // two convs per encoder level
            twice_r += jump; // 2x2 pooling adds half a jump
            jump *= 2;
        }
        twice_r += 2 * half_k * jump; // bottom conv
        for _ in 0..self.depth {
            jump /= 2;
            twice_r += 2 * 2 * half_k * jump; // two convs per decoder level
        }
        twice_r += 2 * half_k; // output conv
        twice_r.div_ceil(2)
    }
}

/// All trainable tensors, stored in a fixed canonical order. Names follow
/// the layer path ("enc0.conv1", "bottom.conv0", "dec1.conv0", ...).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub convs: Vec<Conv2d>,
}

/// Gradient with respect to every parameter tensor, mirroring
/// [`NetworkParams::convs`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &NetworkParams) -> ParamGrads {
        ParamGrads {
            weight: params
                .convs
                .iter()
                .map(|c| vec![0.0; c.weight.len()])
                .collect(),
            bias: params
                .convs
                .iter()
                .map(|c| vec![0.0; c.bias.len()])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
    }
}

/// Conv layout order: encoder pairs, bottom, decoder pairs (deepest level
/// first, matching processing order), output conv.
fn conv_plan(config: &NetworkConfig) -> Vec<(String, usize, usize)> {
    let ch = &config.channels;
    let mut plan = Vec::new();
    let mut inc = 1;
    for l in 0..config.depth {
        plan.push((format!("enc{l}.conv0"), inc, ch[l]));
        plan.push((format!("enc{l}.conv1"), ch[l], ch[l]));
        inc = ch[l];
    }
    let deepest = ch[config.depth - 1];
    plan.push(("bottom.conv0".to_string(), deepest, deepest));
    let mut trunk = deepest;
    for l in (0..config.depth).rev() {
        plan.push((format!("dec{l}.conv0"), trunk + ch[l], ch[l]));
        plan.push((format!("dec{l}.conv1"), ch[l], ch[l]));
        trunk = ch[l];
    }
    plan.push(("output.conv0".to_string(), ch[0], 1));
    plan
}

impl NetworkParams {
    /// He initialization for all hidden convolutions; the output convolution
    /// starts at zero so the residual network begins as the identity
    /// restoration.
    pub fn init(config: &NetworkConfig, rng: &mut Rng) -> Result<NetworkParams> {
        config.validate()?;
        let plan = conv_plan(config);
        let last = plan.len() - 1;
        let convs = plan
            .iter()
            .enumerate()
            .map(|(i, (_, inc, outc))| {
                if i == last {
                    Conv2d::zeros(*inc, *outc, config.kernel)
                } else {
                    Conv2d::he_init(*inc, *outc, config.kernel, rng)
                }
            })
            .collect();
        Ok(NetworkParams {
            config: config.clone(),
            convs,
        })
    }

    pub fn zeros(config: &NetworkConfig) -> Result<NetworkParams> {
        config.validate()?;
        let convs = conv_plan(config)
            .iter()
            .map(|(_, inc, outc)| Conv2d::zeros(*inc, *outc, config.kernel))
            .collect();
        Ok(NetworkParams {
            config: config.clone(),
            convs,
        })
    }

    pub fn layer_names(&self) -> Vec<String> {
        conv_plan(&self.config).into_iter().map(|p| p.0).collect()
    }

    pub fn num_params(&self) -> usize {
        self.convs.iter().map(|c| c.num_params()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.convs
            .iter()
            .all(|c| c.weight.iter().chain(c.bias.iter()).all(|v| v.is_finite()))
    }

    /// Quantize every tensor through f32, matching the checkpoint payload
    /// precision. Training applies this at epoch boundaries so a run that
    /// saves and resumes is bit-identical to one that never stopped.
    pub fn round_trip_f32(&mut self) {
        for conv in self.convs.iter_mut() {
            for v in conv.weight.iter_mut().chain(conv.bias.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }

    fn output_conv(&self) -> &Conv2d {
        self.convs.last().unwrap()
    }
}

struct ConvTrace {
    conv_idx: usize,
    input: Tensor,
    /// Rectifier output (None for the final linear conv).
    activated: Option<Tensor>,
}

struct EncTrace {
    pool_argmax: Vec<u32>,
    pre_pool_h: usize,
    pre_pool_w: usize,
}

/// Intermediate values recorded by [`forward`] for the backward pass.
pub struct ForwardCache {
    input: Tensor,
    convs: Vec<ConvTrace>,
    enc: Vec<EncTrace>,
    /// Channel count entering each decoder concat, per processing step.
    dec_trunk_channels: Vec<usize>,
}

fn run_conv_block(
    params: &NetworkParams,
    conv_idx: usize,
    x: Tensor,
    cache: &mut Vec<ConvTrace>,
) -> Tensor {
    let out = conv_forward(&params.convs[conv_idx], &x);
    let act = leaky_relu_forward(&out, params.config.leaky_slope);
    cache.push(ConvTrace {
        conv_idx,
        input: x,
        activated: Some(act.clone()),
    });
    act
}

/// Run the denoiser. Returns the despeckled tensor (input minus predicted
/// noise) and the cache for [`backward`].
pub fn forward(params: &NetworkParams, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
    let cfg = &params.config;
    if input.c != 1 {
        return Err(Error::ShapeMismatch(format!(
            "network expects a single input channel, got {}",
            input.c
        )));
    }
    let div = cfg.divisor();
    if input.h % div != 0 || input.w % div != 0 {
        return Err(Error::ShapeMismatch(format!(
            "spatial size {}x{} not divisible by 2^depth = {div}",
            input.h, input.w
        )));
    }
    let mut conv_traces = Vec::new();
    let mut enc_traces = Vec::new();
    let mut skips: Vec<Tensor> = Vec::new();
    let mut x = input.clone();
    for l in 0..cfg.depth {
        x = run_conv_block(params, 2 * l, x, &mut conv_traces);
        x = run_conv_block(params, 2 * l + 1, x, &mut conv_traces);
        let (pooled, argmax) = maxpool_forward(&x);
        enc_traces.push(EncTrace {
            pool_argmax: argmax,
            pre_pool_h: x.h,
            pre_pool_w: x.w,
        });
        skips.push(x);
        x = pooled;
    }
    x = run_conv_block(params, 2 * cfg.depth, x, &mut conv_traces);
    let mut dec_trunk_channels = Vec::new();
    let dec_base = 2 * cfg.depth + 1;
    for (step, l) in (0..cfg.depth).rev().enumerate() {
        let up = upsample_forward(&x);
        dec_trunk_channels.push(up.c);
        x = concat_channels(&up, &skips[l]);
        x = run_conv_block(params, dec_base + 2 * step, x, &mut conv_traces);
        x = run_conv_block(params, dec_base + 2 * step + 1, x, &mut conv_traces);
    }
    let out_idx = params.convs.len() - 1;
    let raw = conv_forward(params.output_conv(), &x);
    conv_traces.push(ConvTrace {
        conv_idx: out_idx,
        input: x,
        activated: None,
    });
    // residual wiring: the stack predicts the noise
    let mut despeckled = input.clone();
    for (d, r) in despeckled.data.iter_mut().zip(&raw.data) {
        *d -= r;
    }
    Ok((
        despeckled,
        ForwardCache {
            input: input.clone(),
            convs: conv_traces,
            enc: enc_traces,
            dec_trunk_channels,
        },
    ))
}

/// Exact gradients of the scalar loss with respect to every parameter, given
/// the gradient of the loss with respect to the despeckled output.
pub fn backward(
    params: &NetworkParams,
    cache: &ForwardCache,
    grad_despeckled: &Tensor,
) -> Result<ParamGrads> {
    let cfg = &params.config;
    if !grad_despeckled.same_shape(&cache.input) {
        return Err(Error::ShapeMismatch(
            "loss gradient shape does not match the cached forward input".to_string(),
        ));
    }
    let mut grads = ParamGrads::zeros_like(params);
    let slope = cfg.leaky_slope;
    let mut trace_iter = cache.convs.iter().rev();

    // despeckled = input - raw  =>  d raw = -g
    let mut g = grad_despeckled.clone();
    for v in g.data.iter_mut() {
        *v = -*v;
    }
    let out_trace = trace_iter.next().unwrap();
    g = conv_backward(
        params.output_conv(),
        &out_trace.input,
        &g,
        &mut grads.weight[out_trace.conv_idx],
        &mut grads.bias[out_trace.conv_idx],
    );

    // decoder levels, unwinding processing order
    let mut skip_grads: Vec<Option<Tensor>> = (0..cfg.depth).map(|_| None).collect();
    for (step, l) in (0..cfg.depth).rev().enumerate().rev() {
        for _ in 0..2 {
            let t = trace_iter.next().unwrap();
            let act = t.activated.as_ref().unwrap();
            g = leaky_relu_backward(act, &g, slope);
            g = conv_backward(
                &params.convs[t.conv_idx],
                &t.input,
                &g,
                &mut grads.weight[t.conv_idx],
                &mut grads.bias[t.conv_idx],
            );
        }
        let trunk_c = cache.dec_trunk_channels[step];
        let (g_trunk, g_skip) = split_channels(&g, trunk_c);
        skip_grads[l] = Some(g_skip);
        g = upsample_backward(&g_trunk);
    }

    // bottom conv
    let t = trace_iter.next().unwrap();
    let act = t.activated.as_ref().unwrap();
    g = leaky_relu_backward(act, &g, slope);
    g = conv_backward(
        &params.convs[t.conv_idx],
        &t.input,
        &g,
        &mut grads.weight[t.conv_idx],
        &mut grads.bias[t.conv_idx],
    );

    // encoder levels in reverse
    for l in (0..cfg.depth).rev() {
        let enc = &cache.enc[l];
        let mut gin = maxpool_backward(&g, &enc.pool_argmax, enc.pre_pool_h, enc.pre_pool_w);
        if let Some(skip) = skip_grads[l].take() {
            for (a, b) in gin.data.iter_mut().zip(&skip.data) {
                *a += b;
            }
        }
        g = gin;
        for _ in 0..2 {
            let t = trace_iter.next().unwrap();
            let act = t.activated.as_ref().unwrap();
            g = leaky_relu_backward(act, &g, slope);
            g = conv_backward(
                &params.convs[t.conv_idx],
                &t.input,
                &g,
                &mut grads.weight[t.conv_idx],
                &mut grads.bias[t.conv_idx],
            );
        }
    }
    debug_assert!(trace_iter.next().is_none());
    Ok(grads)
}
