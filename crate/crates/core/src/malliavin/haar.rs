//! Haar operator `A_α` on `L²([0, 1])` and the compactness ratio.
//!
//! Functions are sampled at `2^K` cell-left points of `[0, 1]`. The discrete
//! transform is orthonormal, with coefficient `0` the mean and coefficients
//! `2^k..2^{k+1}` the wavelets of level `k`; `A_α` multiplies level `k` by
//! `2^{kα}` and leaves the mean alone.

use crate::error::{invalid, Result};

fn depth_of(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return invalid(format!(
            "Haar transform needs 2^K samples with K >= 1, got {n}"
        ));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Orthonormal discrete Haar transform.
pub fn haar_forward(f: &[f64]) -> Result<Vec<f64>> {
    depth_of(f.len())?;
    let mut work = f.to_vec();
    let mut out = vec![0.0; f.len()];
    let mut n = f.len();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    while n > 1 {
        let half = n / 2;
        for j in 0..half {
            let (a, b) = (work[2 * j], work[2 * j + 1]);
            out[half + j] = (a - b) * r;
            work[j] = (a + b) * r;
        }
        n = half;
    }
    out[0] = work[0];
    Ok(out)
}

pub fn haar_inverse(c: &[f64]) -> Result<Vec<f64>> {
    depth_of(c.len())?;
    let mut work = vec![0.0; c.len()];
    work[0] = c[0];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut n = 1;
    let mut next = vec![0.0; c.len()];
    while n < c.len() {
        for j in 0..n {
            let (a, d) = (work[j], c[n + j]);
            next[2 * j] = (a + d) * r;
            next[2 * j + 1] = (a - d) * r;
        }
        n *= 2;
        work[..n].copy_from_slice(&next[..n]);
    }
    Ok(work)
}

/// `A_α` for a fixed `α ∈ (0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaarOperator {
    alpha: f64,
}

impl HaarOperator {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return invalid(format!("α must lie in (0, 1/2), got {alpha}"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut c = haar_forward(f)?;
        let depth = depth_of(f.len())?;
        for k in 1..depth {
            let scale = (k as f64 * self.alpha).exp2();
            for v in &mut c[1 << k..2 << k] {
                *v *= scale;
            }
        }
        haar_inverse(&c)
    }
}

pub fn haar_apply(f: &[f64], alpha: f64) -> Result<Vec<f64>> {
    HaarOperator::new(alpha)?.apply(f)
}

/// The `L²`-normalised wavelet `ψ_{k,j}` sampled at `2^depth` points.
pub fn haar_wavelet(depth: usize, level: usize, shift: usize) -> Result<Vec<f64>> {
    if level >= depth || shift >= 1 << level {
        return invalid(format!("no wavelet ({level}, {shift}) at depth {depth}"));
    }
    let n = 1usize << depth;
    let width = n >> level;
    let height = (level as f64 / 2.0).exp2();
    let mut f = vec![0.0; n];
    for (m, v) in f[shift * width..(shift + 1) * width].iter_mut().enumerate() {
        *v = if m < width / 2 { height } else { -height };
    }
    Ok(f)
}

/// `(∫_0^1 f²)^{1/2}` by the cell rule.
pub fn l2_norm(f: &[f64]) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
    crate::stats::mean(&sq).sqrt()
}

/// `(∫∫ |f(t) - f(t')|² / |t - t'|^{1 + 2β} dt dt')^{1/2}` by a cell-centre
/// double sum, leaving out the diagonal cells.
pub fn sobolev_seminorm(f: &[f64], beta: f64) -> f64 {
    let n = f.len();
    let h = 1.0 / n as f64;
    let mut total = 0.0;
    for lag in 1..n {
        let s: f64 = f[lag..].iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
        total += 2.0 * s / (lag as f64 * h).powf(1.0 + 2.0 * beta);
    }
    (total * h * h).sqrt()
}

/// `‖A_α f‖ / (‖f‖ + S_β(f))` for `0 < α < β < 1/2`.
pub fn compactness_ratio(f: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha < beta && beta < 0.5) {
        return invalid(format!("need α < β < 1/2, got α = {alpha}, β = {beta}"));
    }
    let af = haar_apply(f, alpha)?;
    Ok(l2_norm(&af) / (l2_norm(f) + sobolev_seminorm(f, beta)))
}
