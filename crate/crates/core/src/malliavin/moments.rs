//! Moment estimate `E[(∫_{t0}^{t} b'(u, x + σ·B_u) du)^n] <= C^n (1 + |x|^n) (n/2)! (t - t0)^{n/2}`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::paths::BrownianEnsemble;
use crate::stats::{linear_fit, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothMoment {
    pub n: u32,
    pub x: f64,
    pub t0: f64,
    pub h: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// `(1 + |x|^n) (n/2)! h^{n/2}`: the right side without its constant.
    pub rhs_shape: Vec<f64>,
    /// Slope of `log E` against `log h`; `None` when some estimate is zero.
    pub exponent: Option<f64>,
}

/// Monte Carlo estimate of the left side for each window length in `h`
/// (windows `[t0, t0 + h]`, left-point sums on the noise grid).
pub fn smooth_moment_check<F>(
    b_dx: F,
    x: f64,
    n: u32,
    t0: f64,
    h: &[f64],
    sigma: &[f64],
    noise: &BrownianEnsemble,
) -> Result<SmoothMoment>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    if n == 0 || n % 2 == 1 || n > 8 {
        return invalid(format!("moment order must be even and at most 8, got {n}"));
    }
    if sigma.len() != noise.d {
        return invalid("σ and noise dimensions differ");
    }
    let grid = noise.grid;
    let start = grid.index(t0)?;
    let ends = h
        .iter()
        .map(|&len| grid.index(t0 + len))
        .collect::<Result<Vec<_>>>()?;
    if ends.iter().any(|&e| e <= start) {
        return invalid("every window must contain at least one step");
    }
    let last = *ends.iter().max().expect("non-empty");
    let dt = grid.dt();
    let powers = noise.map(|_, path| {
        let b = path.project(sigma);
        let mut acc = 0.0;
        let mut out = vec![0.0; ends.len()];
        for (k, &bk) in b.iter().enumerate().take(last).skip(start) {
            acc += b_dx(grid.time(k), x + bk) * dt;
            for (o, &e) in out.iter_mut().zip(&ends) {
                if e == k + 1 {
                    *o = acc.powi(n as i32);
                }
            }
        }
        out
    });
    let estimates: Vec<Estimate> = (0..h.len())
        .map(|m| Estimate::from_samples(&powers.iter().map(|p| p[m]).collect::<Vec<f64>>()))
        .collect();
    let factorial: f64 = (1..=n / 2).map(f64::from).product();
    let rhs_shape = h
        .iter()
        .map(|len| (1.0 + x.abs().powi(n as i32)) * factorial * len.powf(n as f64 / 2.0))
        .collect();
    let exponent = if estimates.iter().all(|e| e.mean > 0.0) {
        let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = estimates.iter().map(|e| e.mean.ln()).collect();
        linear_fit(&xs, &ys).map(|f| f.1)
    } else {
        None
    };
    Ok(SmoothMoment {
        n,
        x,
        t0,
        h: h.to_vec(),
        estimates,
        rhs_shape,
        exponent,
    })
}
