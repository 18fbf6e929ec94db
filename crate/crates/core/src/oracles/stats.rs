use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods come from libm without std
use num_traits::Float;

use crate::{Error, Result};

/// Level of the distributional checks.
pub const KS_SIGNIFICANCE: f64 = 0.01;

/// Pairwise (cascade) sum; the association order depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Sample mean with standard error `s/√count` per component.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub estimate: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub count: usize,
    pub seed: u64,
}

impl EstimatorResult {
    /// Mean and standard error of `samples` (each of equal length), using
    /// pairwise summation in sample order.
    pub fn from_samples(samples: &[Vec<f64>], seed: u64) -> Result<Self> {
        let count = samples.len();
        if count < 2 {
            return Err(Error::InvalidParameter(format!("an estimator needs at least 2 samples, got {count}")));
        }
        let width = samples[0].len();
        if samples.iter().any(|s| s.len() != width) {
            return Err(Error::DimensionMismatch("samples differ in length".into()));
        }
        let n = count as f64;
        let column = |j: usize| -> Vec<f64> { samples.iter().map(|s| s[j]).collect() };
        let mut estimate = Vec::with_capacity(width);
        let mut standard_error = Vec::with_capacity(width);
        for j in 0..width {
            let col = column(j);
            if col.iter().all(|v| *v == col[0]) {
                // Exact for degenerate (noise-free) samples.
                estimate.push(col[0]);
                standard_error.push(0.0);
                continue;
            }
            let m = pairwise_sum(&col) / n;
            let dev: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
            estimate.push(m);
            standard_error.push((pairwise_sum(&dev) / (n - 1.0) / n).sqrt());
        }
        Ok(Self { estimate, standard_error, count, seed })
    }

    /// A value known without sampling error.
    pub fn exact(estimate: Vec<f64>, seed: u64) -> Self {
        let standard_error = alloc::vec![0.0; estimate.len()];
        Self { estimate, standard_error, count: 1, seed }
    }

    /// `|estimate_j − reference_j| / SE_j` (infinite when SE is 0 and the values differ).
    pub fn z_scores(&self, reference: &[f64]) -> Vec<f64> {
        self.estimate
            .iter()
            .zip(&self.standard_error)
            .zip(reference)
            .map(|((e, s), r)| {
                let d = (e - r).abs();
                if d == 0.0 {
                    0.0
                } else if *s == 0.0 {
                    f64::INFINITY
                } else {
                    d / s
                }
            })
            .collect()
    }
}

/// Median (average of the middle pair for even length); NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (sd * core::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub count: usize,
    pub pass: bool,
}

/// One-sample Kolmogorov–Smirnov test against `N(mean, sd²)` at
/// [`KS_SIGNIFICANCE`], with the asymptotic Kolmogorov distribution.
pub fn ks_test_normal(samples: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    if samples.len() < 2 || sd.is_nan() || sd <= 0.0 {
        return Err(Error::InvalidParameter("KS test needs ≥ 2 samples and a positive deviation".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let d = v.iter().enumerate().fold(0.0f64, |d, (i, x)| {
        let f = normal_cdf(*x, mean, sd);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    });
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p_value = kolmogorov_q(lambda);
    Ok(KsResult { statistic: d, p_value, count: v.len(), pass: p_value > KS_SIGNIFICANCE })
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
