//! Drift decomposition `b = b1 + b2`.
//!
//! [`DeterministicDrift`] is the measurable part `b1(t, x)` with linear growth
//! `|b1(t, x)| <= k (1 + |x|)`. [`RandomDrift`] is the adapted part
//! `b2(t, x, ω)`; it is evaluated through a [`PathDrift`], the drift frozen on
//! one noise realisation.

pub mod catalog;
mod mollify;
mod random;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::paths::BrownianPath;

pub use mollify::{cutoff, mollify, Bump, MollifiedFamily};
pub use random::{PhiOfNoise, WienerIntegral, ZeroRandom};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type JointFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// Deterministic drift `b1(t, x)`.
#[derive(Clone)]
pub struct DeterministicDrift {
    name: String,
    growth: f64,
    eval: ScalarFn,
    eval_dx: Option<ScalarFn>,
    joint: Option<JointFn>,
    jumps: Vec<f64>,
    level: Option<u32>,
}

impl fmt::Debug for DeterministicDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeterministicDrift")
            .field("name", &self.name)
            .field("growth", &self.growth)
            .field("smooth", &self.is_smooth())
            .field("jumps", &self.jumps)
            .field("level", &self.level)
            .finish()
    }
}

impl DeterministicDrift {
    /// A drift given by `f`, satisfying `|f(t, x)| <= growth (1 + |x|)`.
    pub fn new(
        name: impl Into<String>,
        growth: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            growth,
            eval: Arc::new(f),
            eval_dx: None,
            joint: None,
            jumps: Vec::new(),
            level: None,
        }
    }

    /// Attaches the spatial derivative, marking the drift smooth.
    pub fn with_derivative(mut self, df: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.eval_dx = Some(Arc::new(df));
        self
    }

    /// Value and derivative computed together, for drifts where the two share
    /// most of their cost. Marks the drift smooth.
    pub fn with_joint(
        mut self,
        both: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        let both: JointFn = Arc::new(both);
        let value = both.clone();
        let slope = both.clone();
        self.eval = Arc::new(move |t, x| value(t, x).0);
        self.eval_dx = Some(Arc::new(move |t, x| slope(t, x).1));
        self.joint = Some(both);
        self
    }

    /// Declares spatial discontinuities; mollification splits its quadrature there.
    pub fn with_jumps(mut self, jumps: Vec<f64>) -> Self {
        self.jumps = jumps;
        self
    }

    pub(crate) fn with_level(mut self, level: u32) -> Self {
        self.level = Some(level);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Linear-growth constant `k`.
    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn is_smooth(&self) -> bool {
        self.eval_dx.is_some()
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// Mollification level this drift was produced at, if any.
    pub fn level(&self) -> Option<u32> {
        self.level
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.eval)(t, x)
    }

    #[inline]
    pub fn eval_dx(&self, t: f64, x: f64) -> Option<f64> {
        self.eval_dx.as_ref().map(|df| df(t, x))
    }

    /// `(b1, ∂_x b1)` at `(t, x)` when the derivative is known.
    #[inline]
    pub fn eval_with_dx(&self, t: f64, x: f64) -> Option<(f64, f64)> {
        match (&self.joint, &self.eval_dx) {
            (Some(both), _) => Some(both(t, x)),
            (None, Some(df)) => Some(((self.eval)(t, x), df(t, x))),
            (None, None) => None,
        }
    }
}

/// The random drift `b2` frozen on a single noise path. Times are grid indices.
pub trait PathDrift: Send + Sync {
    /// `b2(t_k, x, ω)`
    fn eval(&self, k: usize, x: f64) -> f64;

    /// `∂_x b2(t_k, x, ω)`
    fn eval_dx(&self, k: usize, x: f64) -> f64;

    /// `D^i_{t_j} b2(t_k, x, ω)`, zero for `j > k`.
    fn malliavin(&self, j: usize, k: usize, x: f64, i: usize) -> f64;

    /// `M2(ω)` bounding `|b2| + |∂_x b2|` uniformly in `(t, x)`.
    fn m2(&self) -> f64;

    /// `M̃2(t_k, t_j, ω)` bounding `|D_{t_j} b2(t_k, ·)|`.
    fn m2_tilde(&self, k: usize, j: usize) -> f64;
}

/// Adapted random drift `b2(t, x, ω)`.
pub trait RandomDrift: Send + Sync + fmt::Debug {
    fn key(&self) -> &str;

    fn depends_on_x(&self) -> bool;

    /// Freezes the drift on `path`. The realisation at grid index `k` may only
    /// read the path up to `k`.
    fn realize<'a>(&'a self, path: &BrownianPath) -> Box<dyn PathDrift + 'a>;

    fn is_zero(&self) -> bool {
        false
    }

    /// A deterministic bound on `M2(ω)`, when one exists.
    fn m2_bound(&self) -> Option<f64> {
        None
    }
}

/// Sampling region `[t_lo, t_hi] × [x_lo, x_hi]` for finite bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationBox {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub nt: usize,
    pub nx: usize,
}

impl VerificationBox {
    /// `[t0, horizon] × [-10, 10]` with `10^3 × 10^3` samples.
    pub fn standard(t0: f64, horizon: f64) -> Self {
        Self {
            t_lo: t0,
            t_hi: horizon,
            x_lo: -10.0,
            x_hi: 10.0,
            nt: 1000,
            nx: 1000,
        }
    }

    pub fn coarse(t0: f64, horizon: f64) -> Self {
        Self {
            nt: 20,
            nx: 400,
            ..Self::standard(t0, horizon)
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.t_hi >= self.t_lo && self.x_hi > self.x_lo && self.nt >= 1 && self.nx >= 2)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.nt.max(1);
        (0..n).map(move |i| {
            if n == 1 {
                self.t_lo
            } else {
                self.t_lo + (self.t_hi - self.t_lo) * i as f64 / (n - 1) as f64
            }
        })
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nx)
            .map(move |i| self.x_lo + (self.x_hi - self.x_lo) * i as f64 / (self.nx - 1) as f64)
    }
}

/// Largest sampled `|b1(t, z)| / (1 + |z|)`: a lower bound of `‖b̃1‖_∞`.
pub fn linear_growth_norm(b1: &DeterministicDrift, region: &VerificationBox) -> crate::Result<f64> {
    if region.is_degenerate() {
        return crate::error::invalid("verification box is degenerate");
    }
    let times: Vec<f64> = region.times().collect();
    let rows = crate::par_map(times.len(), |i| {
        region
            .points()
            .map(|z| b1.eval(times[i], z).abs() / (1.0 + z.abs()))
            .fold(0.0, f64::max)
    });
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// Checks `|b1| <= k (1 + |x|)` on the sampled region.
pub fn satisfies_growth_bound(
    b1: &DeterministicDrift,
    region: &VerificationBox,
) -> crate::Result<bool> {
    Ok(linear_growth_norm(b1, region)? <= b1.growth() * (1.0 + 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_norm_of_zero_is_zero() {
        let b = catalog::zero();
        assert_eq!(
            linear_growth_norm(&b, &VerificationBox::coarse(0.0, 1.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn growth_norm_saturates_for_extremal_drift() {
        let k = 2.5;
        let b = DeterministicDrift::new("extremal", k, move |_, x: f64| k * (1.0 + x.abs()));
        let v = linear_growth_norm(&b, &VerificationBox::standard(0.0, 1.0)).unwrap();
        assert!((v - k).abs() < 1e-12);
    }

    #[test]
    fn growth_norm_of_sine_is_at_most_one() {
        let b = catalog::sine(1.0);
        let v = linear_growth_norm(&b, &VerificationBox::standard(0.0, 1.0)).unwrap();
        assert!(v <= 1.0 && v > 0.3);
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let mut region = VerificationBox::coarse(0.0, 1.0);
        region.x_hi = region.x_lo;
        assert!(linear_growth_norm(&catalog::zero(), &region).is_err());
    }

    #[test]
    fn catalog_drifts_respect_their_growth_constant() {
        for key in catalog::deterministic_keys() {
            let b = catalog::deterministic(key).unwrap();
            assert!(
                satisfies_growth_bound(&b, &VerificationBox::coarse(0.0, 1.0)).unwrap(),
                "{key}"
            );
        }
    }
}
