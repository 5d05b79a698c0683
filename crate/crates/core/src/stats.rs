//! Order-independent reductions and Monte Carlo summaries.
//!
//! Every ensemble reduction in the crate collects per-path values into a
//! vector indexed by path and then sums pairwise, so the result does not
//! depend on how the paths were scheduled across workers.

use serde::Serialize;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let m = mean(xs);
        if n < 2 {
            return Self {
                mean: m,
                se: 0.0,
                n,
            };
        }
        let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        Self {
            mean: m,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `|self - other| <= k * sqrt(se_a^2 + se_b^2)`
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let combined = (self.se * self.se + other.se * other.se).sqrt();
        (self.mean - other.mean).abs() <= k * combined
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Mean of `exp(l_i)` computed in log space, returned as `(log_mean, estimate)`.
///
/// The standard error is computed relative to the largest term so that huge
/// exponents do not overflow before they are compared.
pub fn log_mean_exp(logs: &[f64]) -> (f64, Estimate) {
    let n = logs.len();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let e = Estimate {
            mean: if max == f64::INFINITY {
                f64::INFINITY
            } else {
                0.0
            },
            se: 0.0,
            n,
        };
        return (max, e);
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let est = Estimate::from_samples(&scaled);
    let log_mean = max + est.mean.ln();
    let factor = max.exp();
    (
        log_mean,
        Estimate {
            mean: est.mean * factor,
            se: est.se * factor,
            n,
        },
    )
}

/// Result of a Monte Carlo estimate of a possibly infinite exponential moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub estimate: f64,
    pub se: f64,
    /// Natural log of the estimate; finite even when `estimate` overflows.
    pub log_estimate: f64,
    /// Estimate over the first half of the sample.
    pub half_estimate: f64,
    pub n: usize,
    pub unstable: bool,
}

/// Estimates `E[exp(l)]` from log-samples and flags instability.
///
/// The estimate is unstable when it changes by a factor of two or more
/// between the first half of the sample and the whole sample, or when its
/// relative standard error exceeds one half.
pub fn exponential_moment(logs: &[f64]) -> MomentCheck {
    let n = logs.len();
    let (log_full, full) = log_mean_exp(logs);
    let (log_half, half) = log_mean_exp(&logs[..(n / 2).max(1)]);
    let ratio_log = (log_full - log_half).abs();
    let rel_se = if full.mean > 0.0 && full.mean.is_finite() {
        full.se / full.mean
    } else {
        f64::INFINITY
    };
    MomentCheck {
        estimate: full.mean,
        se: full.se,
        log_estimate: log_full,
        half_estimate: half.mean,
        n,
        unstable: !log_full.is_finite() || ratio_log >= std::f64::consts::LN_2 || rel_se > 0.5,
    }
}

/// Ordinary least squares `y = a + b x`, returning `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let sxx = pairwise_sum(&sxx);
    if sxx <= 0.0 {
        return None;
    }
    let b = pairwise_sum(&sxy) / sxx;
    Some((my - b * mx, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_se() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn log_mean_exp_handles_large_exponents() {
        let (l, e) = log_mean_exp(&[1000.0, 1000.0]);
        assert!((l - 1000.0).abs() < 1e-12);
        assert!(e.mean.is_infinite());
    }

    #[test]
    fn exponential_moment_of_zero_logs_is_one() {
        let m = exponential_moment(&[0.0; 100]);
        assert_eq!(m.estimate, 1.0);
        assert!(!m.unstable);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 + 2.0 * x).collect();
        let (a, b) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 1.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }
}
