//! Adam optimizer with bias-corrected moments and the staged learning-rate
//! schedule: base rate for the first five epochs, a tenth of it through epoch
//! ten, a hundredth afterwards.

use super::net::{NetworkParams, ParamGrads};
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const DEFAULT_BASE_LR: f64 = 1e-3;

/// First/second moment accumulators per parameter tensor plus the step
/// counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub base_lr: f64,
    pub m_weight: Vec<Vec<f64>>,
    pub v_weight: Vec<Vec<f64>>,
    pub m_bias: Vec<Vec<f64>>,
    pub v_bias: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &NetworkParams, base_lr: f64) -> AdamState {
        AdamState {
            step: 0,
            base_lr,
            m_weight: params
                .convs
                .iter()
                .map(|c| vec![0.0; c.weight.len()])
                .collect(),
            v_weight: params
                .convs
                .iter()
                .map(|c| vec![0.0; c.weight.len()])
                .collect(),
            m_bias: params
                .convs
                .iter()
                .map(|c| vec![0.0; c.bias.len()])
                .collect(),
            v_bias: params
                .convs
                .iter()
                .map(|c| vec![0.0; c.bias.len()])
                .collect(),
        }
    }

    /// Quantize the moments through f32, matching checkpoint precision; see
    /// `NetworkParams::round_trip_f32`.
    pub fn round_trip_f32(&mut self) {
        for group in [
            &mut self.m_weight,
            &mut self.v_weight,
            &mut self.m_bias,
            &mut self.v_bias,
        ] {
            for t in group.iter_mut() {
                for v in t.iter_mut() {
                    *v = *v as f32 as f64;
                }
            }
        }
    }
}

/// Learning rate in effect during a 1-based epoch: dropped by 10x after the
/// first 5 epochs and by 100x after the first 10.
pub fn effective_lr(base_lr: f64, epoch: usize) -> f64 {
    if epoch > 10 {
        base_lr / 100.0
    } else if epoch > 5 {
        base_lr / 10.0
    } else {
        base_lr
    }
}

/// One Adam update. `epoch` (1-based) selects the scheduled learning rate.
/// Non-finite gradients abort with a numeric error before touching state.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut NetworkParams,
    grads: &ParamGrads,
    epoch: usize,
) -> Result<()> {
    let lr = effective_lr(state.base_lr, epoch);
    adam_step_with_lr(state, params, grads, lr)
}

/// Adam update at an explicit learning rate (the fine-tuning phases use a
/// constant rate instead of the schedule).
pub fn adam_step_with_lr(
    state: &mut AdamState,
    params: &mut NetworkParams,
    grads: &ParamGrads,
    lr: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric(
            "non-finite gradient passed to the optimizer".to_string(),
        ));
    }
    if grads.weight.len() != params.convs.len() {
        return Err(Error::ShapeMismatch(
            "gradient layout does not match parameters".to_string(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let corr1 = 1.0 - BETA1.powi(t);
    let corr2 = 1.0 - BETA2.powi(t);
    for (ci, conv) in params.convs.iter_mut().enumerate() {
        update_slice(
            &mut conv.weight,
            &grads.weight[ci],
            &mut state.m_weight[ci],
            &mut state.v_weight[ci],
            lr,
            corr1,
            corr2,
        );
        update_slice(
            &mut conv.bias,
            &grads.bias[ci],
            &mut state.m_bias[ci],
            &mut state.v_bias[ci],
            lr,
            corr1,
            corr2,
        );
    }
    Ok(())
}

fn update_slice(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    corr1: f64,
    corr2: f64,
) {
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::net::NetworkConfig;
    use crate::rng::Rng;

    fn tiny_params() -> NetworkParams {
        let cfg = NetworkConfig {
            depth: 1,
            channels: vec![2],
            kernel: 3,
            leaky_slope: 0.1,
        };
        let mut rng = Rng::new(2);
        NetworkParams::init(&cfg, &mut rng).unwrap()
    }

    #[test]
    fn schedule_matches_epoch_boundaries() {
        let base = 1e-3;
        for e in 1..=5 {
            assert_eq!(effective_lr(base, e), 1e-3, "epoch {e}");
        }
        for e in 6..=10 {
            assert_eq!(effective_lr(base, e), 1e-4, "epoch {e}");
        }
        assert_eq!(effective_lr(base, 11), 1e-5);
        assert_eq!(effective_lr(base, 30), 1e-5);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut params = tiny_params();
        let before = params.clone();
        let mut state = AdamState::new(&params, 1e-3);
        let mut grads = ParamGrads::zeros_like(&params);
        let mut rng = Rng::new(3);
        for g in grads.weight.iter_mut().flatten() {
            *g = rng.range(-1.0, 1.0);
        }
        adam_step(&mut state, &mut params, &grads, 1).unwrap();
        for ci in 0..params.convs.len() {
            for i in 0..params.convs[ci].weight.len() {
                let g = grads.weight[ci][i];
                if g.abs() < 1e-6 {
                    continue;
                }
                let delta = params.convs[ci].weight[i] - before.convs[ci].weight[i];
                // bias-corrected first step: delta ~ -lr * sign(g)
                assert!(
                    (delta + 1e-3 * g.signum()).abs() < 1e-5,
                    "delta {delta} for gradient {g}"
                );
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = tiny_params();
        let before = params.clone();
        let mut state = AdamState::new(&params, 1e-3);
        let grads = ParamGrads::zeros_like(&params);
        adam_step(&mut state, &mut params, &grads, 1).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn non_finite_gradient_fails_loudly() {
        let mut params = tiny_params();
        let mut state = AdamState::new(&params, 1e-3);
        let mut grads = ParamGrads::zeros_like(&params);
        grads.weight[0][0] = f64::NAN;
        assert!(adam_step(&mut state, &mut params, &grads, 1).is_err());
        assert_eq!(state.step, 0);
    }
}
