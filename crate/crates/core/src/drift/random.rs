use std::fmt;
use std::sync::Arc;

use crate::paths::BrownianPath;

use super::{PathDrift, RandomDrift};

/// `b2 ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRandom;

struct ZeroRealized;

impl PathDrift for ZeroRealized {
    fn eval(&self, _: usize, _: f64) -> f64 {
        0.0
    }
    fn eval_dx(&self, _: usize, _: f64) -> f64 {
        0.0
    }
    fn malliavin(&self, _: usize, _: usize, _: f64, _: usize) -> f64 {
        0.0
    }
    fn m2(&self) -> f64 {
        0.0
    }
    fn m2_tilde(&self, _: usize, _: usize) -> f64 {
        0.0
    }
}

impl RandomDrift for ZeroRandom {
    fn key(&self) -> &str {
        "zero"
    }
    fn depends_on_x(&self) -> bool {
        false
    }
    fn realize<'a>(&'a self, _: &BrownianPath) -> Box<dyn PathDrift + 'a> {
        Box::new(ZeroRealized)
    }
    fn is_zero(&self) -> bool {
        true
    }
    fn m2_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

type Phi = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// `b2(t, x, ω) = φ(t, x, B^c_t(ω))` for a bounded Lipschitz `φ`, with
/// `D^c_s b2(t) = ∂_y φ(t, x, B^c_t) 1_{s ≤ t}`.
#[derive(Clone)]
pub struct PhiOfNoise {
    key: String,
    component: usize,
    phi: Phi,
    phi_dx: Phi,
    phi_dy: Phi,
    /// `sup |φ| + sup |∂_x φ| + sup |∂_y φ|`, a deterministic `M2`.
    bound: f64,
    dy_bound: f64,
    x_dependent: bool,
}

impl fmt::Debug for PhiOfNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiOfNoise")
            .field("key", &self.key)
            .field("component", &self.component)
            .field("bound", &self.bound)
            .field("x_dependent", &self.x_dependent)
            .finish()
    }
}

impl PhiOfNoise {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        key: impl Into<String>,
        component: usize,
        phi: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        phi_dx: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        phi_dy: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        bound: f64,
        dy_bound: f64,
        x_dependent: bool,
    ) -> Self {
        Self {
            key: key.into(),
            component,
            phi: Arc::new(phi),
            phi_dx: Arc::new(phi_dx),
            phi_dy: Arc::new(phi_dy),
            bound,
            dy_bound,
            x_dependent,
        }
    }
}

struct PhiRealized<'a> {
    drift: &'a PhiOfNoise,
    times: Vec<f64>,
    noise: Vec<f64>,
}

impl PathDrift for PhiRealized<'_> {
    fn eval(&self, k: usize, x: f64) -> f64 {
        (self.drift.phi)(self.times[k], x, self.noise[k])
    }
    fn eval_dx(&self, k: usize, x: f64) -> f64 {
        (self.drift.phi_dx)(self.times[k], x, self.noise[k])
    }
    fn malliavin(&self, j: usize, k: usize, x: f64, i: usize) -> f64 {
        if j > k || i != self.drift.component {
            return 0.0;
        }
        (self.drift.phi_dy)(self.times[k], x, self.noise[k])
    }
    fn m2(&self) -> f64 {
        self.drift.bound
    }
    fn m2_tilde(&self, k: usize, j: usize) -> f64 {
        if j > k {
            0.0
        } else {
            self.drift.dy_bound
        }
    }
}

impl RandomDrift for PhiOfNoise {
    fn key(&self) -> &str {
        &self.key
    }
    fn depends_on_x(&self) -> bool {
        self.x_dependent
    }
    fn realize<'a>(&'a self, path: &BrownianPath) -> Box<dyn PathDrift + 'a> {
        let grid = path.grid();
        Box::new(PhiRealized {
            drift: self,
            times: (0..grid.n_points()).map(|k| grid.time(k)).collect(),
            noise: path.component(self.component.min(path.dim() - 1)),
        })
    }
    fn m2_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}

type Alpha = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;

/// Wiener integral `b2(t, ω) = Σ_i ∫_0^t α_i(s) dB^i_s` with deterministic `α`,
/// so `D^i_s b2(t) = α_i(s) 1_{s ≤ t}`. Independent of `x`.
#[derive(Clone)]
pub struct WienerIntegral {
    key: String,
    alpha: Alpha,
    alpha_bound: f64,
}

impl fmt::Debug for WienerIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WienerIntegral")
            .field("key", &self.key)
            .finish()
    }
}

impl WienerIntegral {
    pub fn new(
        key: impl Into<String>,
        alpha: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
        alpha_bound: f64,
    ) -> Self {
        Self {
            key: key.into(),
            alpha: Arc::new(alpha),
            alpha_bound,
        }
    }
}

struct WienerRealized {
    /// `∫_0^{t_k} α dB`, left-point Itô sums.
    integral: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    sup: f64,
    alpha_bound: f64,
}

impl PathDrift for WienerRealized {
    fn eval(&self, k: usize, _: f64) -> f64 {
        self.integral[k]
    }
    fn eval_dx(&self, _: usize, _: f64) -> f64 {
        0.0
    }
    fn malliavin(&self, j: usize, k: usize, _: f64, i: usize) -> f64 {
        if j > k {
            0.0
        } else {
            self.alpha[j][i]
        }
    }
    fn m2(&self) -> f64 {
        self.sup
    }
    fn m2_tilde(&self, k: usize, j: usize) -> f64 {
        if j > k {
            0.0
        } else {
            self.alpha_bound
        }
    }
}

impl RandomDrift for WienerIntegral {
    fn key(&self) -> &str {
        &self.key
    }
    fn depends_on_x(&self) -> bool {
        false
    }
    fn realize<'a>(&'a self, path: &BrownianPath) -> Box<dyn PathDrift + 'a> {
        let grid = path.grid();
        let d = path.dim();
        let alpha: Vec<Vec<f64>> = (0..grid.n_points())
            .map(|k| (0..d).map(|i| (self.alpha)(grid.time(k), i)).collect())
            .collect();
        let mut integral = vec![0.0; grid.n_points()];
        for k in 0..grid.n_steps() {
            let step: f64 = (0..d).map(|i| alpha[k][i] * path.increment(k, i)).sum();
            integral[k + 1] = integral[k] + step;
        }
        let sup = integral.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Box::new(WienerRealized {
            integral,
            alpha,
            sup,
            alpha_bound: self.alpha_bound,
        })
    }
}
