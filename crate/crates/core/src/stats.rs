//! Order-deterministic reductions and Monte Carlo estimates.

use serde::Serialize;

/// Pairwise (cascade) summation over a fixed binary tree. The result
/// depends only on the input order, never on how the inputs were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&dev) / (n - 1) as f64
}

/// Sample covariance of two equally long samples.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    pairwise_sum(&prod) / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Two-sided normal quantile used when reporting intervals.
    pub confidence_z: f64,
}

impl MCEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let se = if n > 1 {
            (variance(values) / n as f64).sqrt()
        } else {
            0.0
        };
        MCEstimate {
            mean: mean(values),
            std_error: se,
            n_paths: n,
            confidence_z: 3.0,
        }
    }

    /// An exactly known value.
    pub fn exact(value: f64) -> Self {
        MCEstimate {
            mean: value,
            std_error: 0.0,
            n_paths: 0,
            confidence_z: 3.0,
        }
    }

    /// Delta-method image under a smooth map with derivative `slope`.
    pub fn map(self, value: f64, slope: f64) -> Self {
        MCEstimate {
            mean: value,
            std_error: self.std_error * slope.abs(),
            ..self
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        let half = self.confidence_z * self.std_error;
        (self.mean - half, self.mean + half)
    }
}

/// `|a − b| ≤ z · sqrt(se_a² + se_b²)`.
pub fn agree_within(a: &MCEstimate, b: &MCEstimate, z: f64) -> bool {
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    (a.mean - b.mean).abs() <= z * se
}
