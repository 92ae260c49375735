//! Estimator-efficiency experiment: RMSE of the debiased l2 and likelihood
//! M-estimators of a constant log-reflectivity as the sample count grows.
//!
//! Both losses admit closed-form scalar minimizers, so the comparison is
//! free of optimizer noise: the l2 estimate is the debiased sample mean, the
//! likelihood estimate averages in intensity before taking the log.

use crate::rng::Rng;
use crate::speckle::{log_speckle_bias, sample_gamma_unit_mean, LooksCount};
use crate::{Error, Result};
use std::io::Write;

/// Closed-form minimizer of the summed debiased l2 loss: mean(y) - bias(L).
pub fn l2_estimate(samples: &[f64], looks: LooksCount) -> f64 {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    mean - log_speckle_bias(looks)
}

/// Closed-form minimizer of the summed likelihood loss: ln(mean(exp(y))),
/// computed in a log-sum-exp fashion.
pub fn likelihood_estimate(samples: &[f64]) -> f64 {
    let m = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + (samples.iter().map(|&y| (y - m).exp()).sum::<f64>() / samples.len() as f64).ln()
}

/// Result of [`run_efficiency_experiment`]; one RMSE pair per sample count.
#[derive(Debug, Clone)]
pub struct EfficiencyCurve {
    pub sample_counts: Vec<usize>,
    pub rmse_l2: Vec<f64>,
    pub rmse_lik: Vec<f64>,
    pub stderr_l2: Vec<f64>,
    pub stderr_lik: Vec<f64>,
    pub trials: usize,
    pub looks: f64,
    pub seed: u64,
}

/// Default sample-count grid.
pub const DEFAULT_SAMPLE_COUNTS: [usize; 8] = [1, 2, 5, 10, 20, 50, 100, 200];

/// For each N, draw `trials` sets of N log-intensity observations around
/// `x_true`, apply both closed-form estimators and record the RMSE of each in
/// log intensity.
pub fn run_efficiency_experiment(
    x_true: f64,
    looks: LooksCount,
    sample_counts: &[usize],
    trials: usize,
    rng: &mut Rng,
) -> Result<EfficiencyCurve> {
    if sample_counts.is_empty() {
        return Err(Error::InvalidArgument(
            "sample_counts must be nonempty".to_string(),
        ));
    }
    if sample_counts.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument(
            "sample counts must be positive".to_string(),
        ));
    }
    if trials < 1000 {
        return Err(Error::InvalidArgument(format!(
            "trials must be >= 1000 for stable RMSE estimates, got {trials}"
        )));
    }
    let mut curve = EfficiencyCurve {
        sample_counts: sample_counts.to_vec(),
        rmse_l2: Vec::new(),
        rmse_lik: Vec::new(),
        stderr_l2: Vec::new(),
        stderr_lik: Vec::new(),
        trials,
        looks: looks.get(),
        seed: rng.seed(),
    };
    let mut samples = Vec::new();
    for &n in sample_counts {
        let mut sq_l2 = 0.0;
        let mut sq_lik = 0.0;
        let mut sq4_l2 = 0.0;
        let mut sq4_lik = 0.0;
        for _ in 0..trials {
            samples.clear();
            for _ in 0..n {
                samples.push(x_true + sample_gamma_unit_mean(looks, rng).ln());
            }
            let e_l2 = l2_estimate(&samples, looks) - x_true;
            let e_lik = likelihood_estimate(&samples) - x_true;
            sq_l2 += e_l2 * e_l2;
            sq_lik += e_lik * e_lik;
            sq4_l2 += e_l2 * e_l2 * e_l2 * e_l2;
            sq4_lik += e_lik * e_lik * e_lik * e_lik;
        }
        let t = trials as f64;
        let mse_l2 = sq_l2 / t;
        let mse_lik = sq_lik / t;
        let rmse_l2 = mse_l2.sqrt();
        let rmse_lik = mse_lik.sqrt();
        // delta method: se(rmse) = se(mse) / (2 rmse)
        let se_mse_l2 = ((sq4_l2 / t - mse_l2 * mse_l2).max(0.0) / t).sqrt();
        let se_mse_lik = ((sq4_lik / t - mse_lik * mse_lik).max(0.0) / t).sqrt();
        curve.rmse_l2.push(rmse_l2);
        curve.rmse_lik.push(rmse_lik);
        curve.stderr_l2.push(se_mse_l2 / (2.0 * rmse_l2));
        curve.stderr_lik.push(se_mse_lik / (2.0 * rmse_lik));
    }
    Ok(curve)
}

impl EfficiencyCurve {
    /// CSV with one row per sample count.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "N,rmse_l2,rmse_lik,stderr_l2,stderr_lik")?;
        for i in 0..self.sample_counts.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.sample_counts[i],
                self.rmse_l2[i],
                self.rmse_lik[i],
                self.stderr_l2[i],
                self.stderr_lik[i]
            )?;
        }
        Ok(())
    }
}
