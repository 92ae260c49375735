//! Self-supervised losses for training on pairs of noisy log-intensity
//! images.
//!
//! The likelihood loss is the negative log-likelihood of the log-domain
//! speckle model with its constant offset and the factor L dropped; the l2
//! variant compensates the nonzero mean of log speckle with the constant
//! psi(L) - ln L. Totals are plain f64 sums so results are reproducible.

use crate::image::{Domain, Image};
use crate::speckle::{log_speckle_bias, LooksCount};
use crate::{Error, Result};

/// Largest exponent fed to exp() before the loss reports an error instead of
/// silently saturating.
pub const EXP_GUARD: f64 = 700.0;

/// Total plus per-pixel loss map; the map supports masking and diagnostics.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub total: f64,
    pub per_pixel: Vec<f64>,
}

fn check_shapes(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Per-pixel f - y + exp(y - f), summed. Minimized at f = y with value 1 per
/// pixel.
pub fn likelihood_loss(pred: &[f64], target: &[f64]) -> Result<LossValue> {
    check_shapes(pred, target)?;
    let mut per_pixel = Vec::with_capacity(pred.len());
    let mut total = 0.0;
    for (i, (&f, &y)) in pred.iter().zip(target).enumerate() {
        let d = y - f;
        if d > EXP_GUARD {
            return Err(Error::Numeric(format!(
                "likelihood loss overflow at pixel {i}: target - prediction = {d} > {EXP_GUARD}"
            )));
        }
        let v = f - y + d.exp();
        per_pixel.push(v);
        total += v;
    }
    Ok(LossValue { total, per_pixel })
}

/// Gradient of [`likelihood_loss`] with respect to the prediction:
/// 1 - exp(y - f), pixelwise.
pub fn likelihood_loss_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_shapes(pred, target)?;
    let mut grad = Vec::with_capacity(pred.len());
    for (i, (&f, &y)) in pred.iter().zip(target).enumerate() {
        let d = y - f;
        if d > EXP_GUARD {
            return Err(Error::Numeric(format!(
                "likelihood gradient overflow at pixel {i}: target - prediction = {d} > {EXP_GUARD}"
            )));
        }
        grad.push(1.0 - d.exp());
    }
    Ok(grad)
}

/// Per-pixel (f - y + psi(L) - ln L)^2, summed. The additive constant removes
/// the log-speckle bias so the minimizer is the true log reflectivity.
pub fn l2_debiased_loss(pred: &[f64], target: &[f64], looks: LooksCount) -> Result<LossValue> {
    check_shapes(pred, target)?;
    let bias = log_speckle_bias(looks);
    let mut per_pixel = Vec::with_capacity(pred.len());
    let mut total = 0.0;
    for (&f, &y) in pred.iter().zip(target) {
        let e = f - y + bias;
        let v = e * e;
        per_pixel.push(v);
        total += v;
    }
    Ok(LossValue { total, per_pixel })
}

/// Gradient of [`l2_debiased_loss`] with respect to the prediction:
/// 2 (f - y + psi(L) - ln L).
pub fn l2_debiased_loss_grad(pred: &[f64], target: &[f64], looks: LooksCount) -> Result<Vec<f64>> {
    check_shapes(pred, target)?;
    let bias = log_speckle_bias(looks);
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&f, &y)| 2.0 * (f - y + bias))
        .collect())
}

fn check_images(pred: &Image, target: &Image) -> Result<()> {
    pred.expect_domain(Domain::LogIntensity)?;
    target.expect_domain(Domain::LogIntensity)?;
    pred.expect_same_shape(target)
}

/// [`likelihood_loss`] on log-intensity images.
pub fn loss_likelihood(pred: &Image, target: &Image) -> Result<LossValue> {
    check_images(pred, target)?;
    likelihood_loss(pred.values(), target.values())
}

/// [`likelihood_loss_grad`] on log-intensity images.
pub fn loss_likelihood_grad(pred: &Image, target: &Image) -> Result<Vec<f64>> {
    check_images(pred, target)?;
    likelihood_loss_grad(pred.values(), target.values())
}

/// [`l2_debiased_loss`] on log-intensity images.
pub fn loss_l2_debiased(pred: &Image, target: &Image, looks: LooksCount) -> Result<LossValue> {
    check_images(pred, target)?;
    l2_debiased_loss(pred.values(), target.values(), looks)
}

/// [`l2_debiased_loss_grad`] on log-intensity images.
pub fn loss_l2_debiased_grad(
    pred: &Image,
    target: &Image,
    looks: LooksCount,
) -> Result<Vec<f64>> {
    check_images(pred, target)?;
    l2_debiased_loss_grad(pred.values(), target.values(), looks)
}

/// Which loss drives a training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LossKind {
    Likelihood,
    L2Debiased,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Likelihood => "likelihood",
            LossKind::L2Debiased => "l2_debiased",
        }
    }

    pub fn parse(s: &str) -> Result<LossKind> {
        match s {
            "likelihood" => Ok(LossKind::Likelihood),
            "l2_debiased" | "l2" => Ok(LossKind::L2Debiased),
            other => Err(Error::Config(format!(
                "unknown loss '{other}' (expected likelihood or l2_debiased)"
            ))),
        }
    }

    pub fn eval(self, pred: &[f64], target: &[f64], looks: LooksCount) -> Result<LossValue> {
        match self {
            LossKind::Likelihood => likelihood_loss(pred, target),
            LossKind::L2Debiased => l2_debiased_loss(pred, target, looks),
        }
    }

    pub fn grad(self, pred: &[f64], target: &[f64], looks: LooksCount) -> Result<Vec<f64>> {
        match self {
            LossKind::Likelihood => likelihood_loss_grad(pred, target),
            LossKind::L2Debiased => l2_debiased_loss_grad(pred, target, looks),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::special::EULER_GAMMA;
    use proptest::prelude::*;

    fn looks(l: f64) -> LooksCount {
        LooksCount::new(l).unwrap()
    }

    #[test]
    fn likelihood_at_minimizer_is_one_per_pixel() {
        let y = vec![0.3, -1.2, 4.0, 0.0];
        let loss = likelihood_loss(&y, &y).unwrap();
        for &v in &loss.per_pixel {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert!((loss.total - 4.0).abs() < 1e-14);
    }

    #[test]
    fn likelihood_one_pixel_offset() {
        // pred = y + 1 at one pixel: contribution 1 + e^-1.
        let y = vec![0.5];
        let pred = vec![1.5];
        let loss = likelihood_loss(&pred, &y).unwrap();
        let expect = 1.0 + (-1.0f64).exp();
        assert!((loss.per_pixel[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn likelihood_total_matches_scalar_loop_oracle() {
        let mut rng = Rng::new(77);
        let pred: Vec<f64> = (0..64).map(|_| rng.range(-2.0, 2.0)).collect();
        let y: Vec<f64> = (0..64).map(|_| rng.range(-2.0, 2.0)).collect();
        let loss = likelihood_loss(&pred, &y).unwrap();
        let mut oracle = 0.0;
        for k in 0..64 {
            oracle += pred[k] - y[k] + (y[k] - pred[k]).exp();
        }
        assert!(
            (loss.total - oracle).abs() <= 1e-12 * oracle.abs(),
            "total {} vs oracle {oracle}",
            loss.total
        );
    }

    #[test]
    fn likelihood_overflow_guard_is_loud() {
        let pred = vec![0.0];
        let y = vec![701.0];
        assert!(matches!(
            likelihood_loss(&pred, &y),
            Err(Error::Numeric(_))
        ));
        assert!(likelihood_loss_grad(&pred, &y).is_err());
    }

    #[test]
    fn likelihood_shape_mismatch() {
        assert!(likelihood_loss(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn likelihood_grad_zero_at_minimizer() {
        let y = vec![0.7, -3.0, 2.2];
        let g = likelihood_loss_grad(&y, &y).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn likelihood_grad_matches_finite_differences() {
        let mut rng = Rng::new(101);
        let pred: Vec<f64> = (0..64).map(|_| rng.range(-2.0, 2.0)).collect();
        let y: Vec<f64> = (0..64).map(|_| rng.range(-2.0, 2.0)).collect();
        let grad = likelihood_loss_grad(&pred, &y).unwrap();
        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for k in 0..pred.len() {
            let mut p = pred.clone();
            p[k] += h;
            let up = likelihood_loss(&p, &y).unwrap().total;
            p[k] -= 2.0 * h;
            let dn = likelihood_loss(&p, &y).unwrap().total;
            let fd = (up - dn) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < 1e-5, "max relative error {max_rel}");
    }

    #[test]
    fn likelihood_is_convex_in_pred() {
        // Second difference along any pixel is positive: exp(y-f) > 0.
        let y = vec![0.4];
        let h = 1e-3;
        for &f in &[-2.0, 0.0, 0.4, 3.0] {
            let l0 = likelihood_loss(&[f - h], &y).unwrap().total;
            let l1 = likelihood_loss(&[f], &y).unwrap().total;
            let l2 = likelihood_loss(&[f + h], &y).unwrap().total;
            assert!(l0 + l2 - 2.0 * l1 > 0.0, "not convex at {f}");
        }
    }

    #[test]
    fn l2_debiased_exact_cancellation() {
        let l = looks(1.0);
        let bias = crate::speckle::log_speckle_bias(l);
        let y = vec![0.2, 1.5, -0.7];
        let pred: Vec<f64> = y.iter().map(|&v| v - bias).collect();
        let loss = l2_debiased_loss(&pred, &y, l).unwrap();
        assert!(loss.total < 1e-24, "total {}", loss.total);
    }

    #[test]
    fn l2_debiased_bias_squared_at_pred_equal_target() {
        let l = looks(1.0);
        let loss = l2_debiased_loss(&[0.0], &[0.0], l).unwrap();
        let expect = EULER_GAMMA * EULER_GAMMA;
        assert!(
            (loss.per_pixel[0] - expect).abs() < 1e-10,
            "{} vs gamma^2 = {expect}",
            loss.per_pixel[0]
        );
    }

    #[test]
    fn l2_debiased_grad_matches_finite_differences() {
        let l = looks(3.0);
        let mut rng = Rng::new(55);
        let pred: Vec<f64> = (0..64).map(|_| rng.range(-2.0, 2.0)).collect();
        let y: Vec<f64> = (0..64).map(|_| rng.range(-2.0, 2.0)).collect();
        let grad = l2_debiased_loss_grad(&pred, &y, l).unwrap();
        // the loss is quadratic, so central differences are exact at any
        // step; a larger step keeps rounding noise below the 1e-6 bar
        let h = 1e-3;
        for k in 0..pred.len() {
            let mut p = pred.clone();
            p[k] += h;
            let up = l2_debiased_loss(&p, &y, l).unwrap().total;
            p[k] -= 2.0 * h;
            let dn = l2_debiased_loss(&p, &y, l).unwrap().total;
            let fd = (up - dn) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-6, "pixel {k}: rel {rel}");
        }
    }

    #[test]
    fn scalar_minimizers_match_grid_search() {
        // For N samples the likelihood minimizer is ln(mean(exp(y))) and the
        // debiased l2 minimizer is mean(y) - psi(L) + ln L; both checked
        // against a three-stage grid refinement to 1e-6.
        let l = looks(1.0);
        let mut rng = Rng::new(202);
        for _ in 0..20 {
            let n = 3 + rng.below(8) as usize;
            let y: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
            let closed_lik = {
                let m = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + (y.iter().map(|&v| (v - m).exp()).sum::<f64>() / n as f64).ln()
            };
            let closed_l2 =
                y.iter().sum::<f64>() / n as f64 - crate::speckle::log_speckle_bias(l);
            let grid = |f: &dyn Fn(f64) -> f64| {
                let mut lo = -5.0;
                let mut hi = 5.0;
                let mut best = lo;
                for _ in 0..4 {
                    let step = (hi - lo) / 400.0;
                    let mut best_v = f64::INFINITY;
                    let mut t = lo;
                    while t <= hi {
                        let v = f(t);
                        if v < best_v {
                            best_v = v;
                            best = t;
                        }
                        t += step;
                    }
                    lo = best - step;
                    hi = best + step;
                }
                best
            };
            let grid_lik = grid(&|t| {
                let pred = vec![t; n];
                likelihood_loss(&pred, &y).unwrap().total
            });
            let grid_l2 = grid(&|t| {
                let pred = vec![t; n];
                l2_debiased_loss(&pred, &y, l).unwrap().total
            });
            assert!(
                (closed_lik - grid_lik).abs() < 1e-6,
                "likelihood {closed_lik} vs grid {grid_lik}"
            );
            assert!(
                (closed_l2 - grid_l2).abs() < 1e-6,
                "l2 {closed_l2} vs grid {grid_l2}"
            );
        }
    }

    #[test]
    fn image_level_wrappers_check_domain() {
        let a = Image::constant(4, 4, Domain::LogIntensity, 0.0).unwrap();
        let b = Image::constant(4, 4, Domain::Intensity, 1.0).unwrap();
        assert!(loss_likelihood(&a, &a).is_ok());
        assert!(loss_likelihood(&a, &b).is_err());
        let c = Image::constant(2, 2, Domain::LogIntensity, 0.0).unwrap();
        assert!(loss_likelihood(&a, &c).is_err());
    }

    proptest! {
        #[test]
        fn joint_permutation_leaves_losses_unchanged(
            values in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..40),
            seed in 0u64..1000,
        ) {
            let pred: Vec<f64> = values.iter().map(|v| v.0).collect();
            let y: Vec<f64> = values.iter().map(|v| v.1).collect();
            let mut idx: Vec<usize> = (0..pred.len()).collect();
            let mut rng = Rng::new(seed);
            rng.shuffle(&mut idx);
            let pred_p: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();
            let y_p: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let l = looks(2.0);
            let a = likelihood_loss(&pred, &y).unwrap().total;
            let b = likelihood_loss(&pred_p, &y_p).unwrap().total;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            let c = l2_debiased_loss(&pred, &y, l).unwrap().total;
            let d = l2_debiased_loss(&pred_p, &y_p, l).unwrap().total;
            prop_assert!((c - d).abs() <= 1e-9 * c.abs().max(1.0));
        }

        #[test]
        fn likelihood_shift_invariance(
            values in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..40),
            shift in -5.0f64..5.0,
        ) {
            let pred: Vec<f64> = values.iter().map(|v| v.0).collect();
            let y: Vec<f64> = values.iter().map(|v| v.1).collect();
            let pred_s: Vec<f64> = pred.iter().map(|v| v + shift).collect();
            let y_s: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let a = likelihood_loss(&pred, &y).unwrap().total;
            let b = likelihood_loss(&pred_s, &y_s).unwrap().total;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
