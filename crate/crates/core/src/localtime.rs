//! Local time-space integrals `∫∫ f(s, z) L^X(ds, dz)` and the local-time
//! representation of the Malliavin derivative.
//!
//! Two routes are provided. For `f` with a spatial derivative,
//! `∫_a^b ∫ f dL^X = -∫_a^b f_z(s, X_s) ds`. For a Brownian motion started at
//! `x` the integral also decomposes into a forward Itô sum, a backward sum
//! against the Brownian motion `W̃` driving the time reversal, and a drift
//! correction `-∫ f(T - s, B̂^x_s) B̂_s / (T - s) ds`. Each sum is evaluated at
//! the left end of its own time direction. Reversed times within `10 dt` of
//! `T`, i.e. forward times in `[0, 10 dt)`, are left out of the
//! decomposition, since `1 / (T - s)` is unbounded there.
//!
//! For a diffusion `dX = b dt + σ · dB` the decomposition is applied to
//! `X - X_0` and divided by `|σ|²`, the quadratic-variation rate, so that
//! both routes refer to the occupation density with respect to `ds`.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::drift::{catalog, DeterministicDrift, ZeroRandom};
use crate::error::{invalid, Error, Result};
use crate::paths::{
    reverse_path, sample_brownian, BrownianEnsemble, BrownianPath, ReversedPath, StreamId, TimeGrid,
};
use crate::quadrature::GaussLegendre;
use crate::sde::{SdeProblem, SmallTimeConstants};
use crate::stats::{exponential_moment, MomentCheck};

/// Forward steps at the start of the path left out of the decomposition.
pub const BAND_STEPS: usize = 10;

type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Bounded,
    Linear,
    /// Faster than linear; admissible for the routes but not for exponential moments.
    Superlinear,
}

/// Integrand `f(s, z)` with an optional spatial derivative.
#[derive(Clone)]
pub struct SpaceTimeIntegrand {
    name: String,
    f: SpaceTimeFn,
    f_dz: Option<SpaceTimeFn>,
    growth: Growth,
}

impl std::fmt::Debug for SpaceTimeIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpaceTimeIntegrand")
            .field("name", &self.name)
            .field("growth", &self.growth)
            .field("has_dz", &self.f_dz.is_some())
            .finish()
    }
}

impl SpaceTimeIntegrand {
    pub fn new(
        name: impl Into<String>,
        growth: Growth,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_dz: None,
            growth,
        }
    }

    pub fn with_derivative(
        mut self,
        f_dz: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.f_dz = Some(Arc::new(f_dz));
        self
    }

    /// `f(s, z) = b1(s, z)`.
    pub fn from_drift(b1: &DeterministicDrift) -> Self {
        let value = b1.clone();
        let mut out = Self::new(b1.name(), Growth::Linear, move |s, z| value.eval(s, z));
        if b1.is_smooth() {
            let slope = b1.clone();
            out.f_dz = Some(Arc::new(move |s, z| slope.eval_dx(s, z).unwrap_or(0.0)));
        }
        out
    }

    pub fn zero() -> Self {
        Self::new("zero", Growth::Bounded, |_, _| 0.0).with_derivative(|_, _| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", Growth::Bounded, move |_, _| c).with_derivative(|_, _| 0.0)
    }

    /// `f(s, z) = z`
    pub fn identity() -> Self {
        Self::new("identity", Growth::Linear, |_, z| z).with_derivative(|_, _| 1.0)
    }

    /// `f(s, z) = z² / 2`
    pub fn half_square() -> Self {
        Self::new("half-square", Growth::Superlinear, |_, z| 0.5 * z * z).with_derivative(|_, z| z)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    #[inline]
    pub fn eval(&self, s: f64, z: f64) -> f64 {
        (self.f)(s, z)
    }

    pub fn eval_dz(&self, s: f64, z: f64) -> Option<f64> {
        self.f_dz.as_ref().map(|g| g(s, z))
    }

    pub fn has_derivative(&self) -> bool {
        self.f_dz.is_some()
    }

    /// `c f`
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        Self {
            name: format!("{c}*{}", self.name),
            f: Arc::new(move |s, z| c * f(s, z)),
            f_dz: self
                .f_dz
                .clone()
                .map(|g| Arc::new(move |s, z| c * g(s, z)) as SpaceTimeFn),
            growth: self.growth,
        }
    }

    /// `f + g`
    pub fn plus(&self, other: &Self) -> Self {
        let (f, g) = (self.f.clone(), other.f.clone());
        let f_dz = match (&self.f_dz, &other.f_dz) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Some(Arc::new(move |s, z| a(s, z) + b(s, z)) as SpaceTimeFn)
            }
            _ => None,
        };
        let growth = match (self.growth, other.growth) {
            (Growth::Bounded, Growth::Bounded) => Growth::Bounded,
            (Growth::Superlinear, _) | (_, Growth::Superlinear) => Growth::Superlinear,
            _ => Growth::Linear,
        };
        Self {
            name: format!("{}+{}", self.name, other.name),
            f: Arc::new(move |s, z| f(s, z) + g(s, z)),
            f_dz,
            growth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HxNorm {
    pub value: f64,
    /// `(∫∫ f² p_s(z - x) dz ds)^{1/2}` before the factor two.
    pub square_term: f64,
    pub moment_term: f64,
    /// Upper limit of the time integral, `min(T, 1)`.
    pub upper: f64,
}

/// The `ℋ^x` norm with `s` integrated over `[0, min(horizon, 1)]`.
///
/// With `z = x + √s y` both inner integrals are Gaussian expectations,
/// `E f(s, x + √s Y)²` and `E |Y| |f(s, x + √s Y)|`, truncated at `|y| = 8`;
/// the outer integrals use `v = √s`, which removes the `s^{-1/2}` singularity.
pub fn hx_norm(f: &SpaceTimeIntegrand, x: f64, horizon: f64) -> Result<HxNorm> {
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let upper = horizon.min(1.0);
    let gl = GaussLegendre::new(16);
    let outer = GaussLegendre::new(32);
    let density = |y: f64| (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut sq, mut mom) = (0.0, 0.0);
    for (u, w) in outer.nodes.iter().zip(&outer.weights) {
        let half = 0.5 * upper.sqrt();
        let v = half * (u + 1.0);
        let wv = w * half;
        let s = v * v;
        let e_sq =
            gl.integrate_composite(-8.0, 8.0, 16, |y| f.eval(s, x + v * y).powi(2) * density(y));
        let e_abs = gl.integrate_composite(-8.0, 8.0, 16, |y| {
            y.abs() * f.eval(s, x + v * y).abs() * density(y)
        });
        sq += wv * 2.0 * v * e_sq;
        mom += wv * 2.0 * e_abs;
    }
    let value = 2.0 * sq.sqrt() + mom;
    if !value.is_finite() {
        return Err(Error::Divergent(format!(
            "ℋ^x norm of '{}' at x = {x}",
            f.name()
        )));
    }
    Ok(HxNorm {
        value,
        square_term: sq.sqrt(),
        moment_term: mom,
        upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    DerivativeIdentity,
    Decomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalTimeIntegral {
    pub value: f64,
    pub route: Route,
    /// Length of the window start that was left out.
    pub boundary_band: f64,
    /// Size of the omitted terms over that band, when they are available.
    pub band_contribution: f64,
}

/// `-Σ_{k=a}^{b-1} f_z(t_k, X_k) dt` over grid indices `[a, b)`.
pub fn lt_via_derivative(
    f: &SpaceTimeIntegrand,
    states: &[f64],
    grid: &TimeGrid,
    a: usize,
    b: usize,
) -> Result<LocalTimeIntegral> {
    let dz = f.f_dz.as_ref().ok_or_else(|| {
        Error::MissingDerivative(format!("'{}' has no spatial derivative", f.name()))
    })?;
    check_window(states, grid, a, b)?;
    let dt = grid.dt();
    let value = -(a..b)
        .map(|k| dz(grid.time(k), states[k]) * dt)
        .sum::<f64>();
    Ok(LocalTimeIntegral {
        value,
        route: Route::DerivativeIdentity,
        boundary_band: 0.0,
        band_contribution: 0.0,
    })
}

fn check_window(states: &[f64], grid: &TimeGrid, a: usize, b: usize) -> Result<()> {
    if states.len() != grid.n_points() {
        return Err(Error::GridMismatch(format!(
            "{} states on a grid of {} points",
            states.len(),
            grid.n_points()
        )));
    }
    if a > b || b > grid.n_steps() {
        return invalid(format!(
            "window [{a}, {b}) outside a grid of {} steps",
            grid.n_steps()
        ));
    }
    Ok(())
}

/// Per-interval terms of the decomposition of `∫∫ f dL^{B^x}`: entry `k`
/// collects the forward term on `[t_k, t_{k+1}]` and the backward terms on the
/// mirrored reversed interval. Entries inside the boundary band are `None`.
pub fn decomposition_terms(
    f: &SpaceTimeIntegrand,
    x: f64,
    reversed: &ReversedPath,
) -> Result<Vec<Option<f64>>> {
    let base = reversed.base();
    if base.dim() != 1 {
        return invalid("the decomposition needs a one-dimensional path");
    }
    let grid = base.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut out = vec![None; n];
    for (k, slot) in out.iter_mut().enumerate().skip(BAND_STEPS) {
        let forward = f.eval(grid.time(k), x + base.value(k, 0)) * base.increment(k, 0);
        // reversed interval m starts at B̂_{s_m} = B_{t_{n-m}}, with T - s_m = t_{n-m}
        let m = n - 1 - k;
        let hat = reversed.hat(m, 0);
        let g = f.eval(grid.time(n - m), x + hat);
        let remaining = (n - m) as f64 * dt;
        let backward = g * reversed.tilde_increment(m, 0) - g * hat / remaining * dt;
        *slot = Some(forward + backward);
    }
    Ok(out)
}

/// The decomposition over forward indices `[a, b)` for the path `x + B`,
/// where `B` is the base of `reversed`. The start is moved past the band.
pub fn lt_via_decomposition(
    f: &SpaceTimeIntegrand,
    x: f64,
    reversed: &ReversedPath,
    a: usize,
    b: usize,
) -> Result<LocalTimeIntegral> {
    let base = reversed.base();
    let grid = *base.grid();
    if a > b || b > grid.n_steps() {
        return invalid(format!(
            "window [{a}, {b}) outside a grid of {} steps",
            grid.n_steps()
        ));
    }
    let terms = decomposition_terms(f, x, reversed)?;
    Ok(sum_window(&terms, f, x, base, a, b))
}

fn sum_window(
    terms: &[Option<f64>],
    f: &SpaceTimeIntegrand,
    x: f64,
    base: &BrownianPath,
    a: usize,
    b: usize,
) -> LocalTimeIntegral {
    let grid = base.grid();
    let start = a.max(BAND_STEPS).min(b);
    let value: f64 = terms[start..b]
        .iter()
        .map(|t| t.expect("outside band"))
        .sum();
    // only the forward part of the band is available without the singular term
    let band_contribution = (a..start)
        .map(|k| f.eval(grid.time(k), x + base.value(k, 0)) * base.increment(k, 0))
        .sum::<f64>()
        .abs();
    LocalTimeIntegral {
        value,
        route: Route::Decomposition,
        boundary_band: (start - a) as f64 * grid.dt(),
        band_contribution,
    }
}

/// `X - X_0` as a one-dimensional path, for running the decomposition on a diffusion.
fn centred_path(states: &[f64], grid: &TimeGrid) -> Result<BrownianPath> {
    let x0 = states[0];
    BrownianPath::from_values(
        *grid,
        1,
        states.iter().map(|v| v - x0).collect(),
        StreamId::new(0, 0),
    )
}

/// Decomposition terms for the diffusion `states`, scaled by `1 / |σ|²`.
pub fn diffusion_terms(
    f: &SpaceTimeIntegrand,
    states: &[f64],
    grid: &TimeGrid,
    sigma_norm_sq: f64,
) -> Result<Vec<Option<f64>>> {
    if states.len() != grid.n_points() {
        return Err(Error::GridMismatch("states do not match the grid".into()));
    }
    let path = centred_path(states, grid)?;
    let terms = decomposition_terms(f, states[0], &reverse_path(&path))?;
    Ok(terms
        .into_iter()
        .map(|t| t.map(|v| v / sigma_norm_sq))
        .collect())
}

/// `∫_{t_a}^{t_b} ∫ f dL^X` for a diffusion path with `d⟨X⟩ = |σ|² dt`.
pub fn lt_via_decomposition_of(
    f: &SpaceTimeIntegrand,
    states: &[f64],
    grid: &TimeGrid,
    sigma_norm_sq: f64,
    a: usize,
    b: usize,
) -> Result<LocalTimeIntegral> {
    check_window(states, grid, a, b)?;
    let terms = diffusion_terms(f, states, grid, sigma_norm_sq)?;
    let path = centred_path(states, grid)?;
    let mut out = sum_window(&terms, f, states[0], &path, a, b);
    out.band_contribution /= sigma_norm_sq;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouteComparison {
    pub path_id: usize,
    pub route_a: f64,
    pub route_b: f64,
    pub rel_err: f64,
}

/// Both routes on `x + B` for every path of `noise`, over `[10 dt, t_b)`.
pub fn compare_routes(
    f: &SpaceTimeIntegrand,
    x: f64,
    noise: &BrownianEnsemble,
    b: usize,
) -> Result<Vec<RouteComparison>> {
    if !f.has_derivative() {
        return Err(Error::MissingDerivative(format!(
            "'{}' has no spatial derivative",
            f.name()
        )));
    }
    noise.try_map(|p, path| {
        let states: Vec<f64> = path.component(0).iter().map(|v| x + v).collect();
        let a = BAND_STEPS.min(b);
        let route_a = lt_via_derivative(f, &states, path.grid(), a, b)?.value;
        let route_b = lt_via_decomposition(f, x, &reverse_path(path), a, b)?.value;
        let rel_err = if route_a == route_b {
            0.0
        } else {
            (route_a - route_b).abs() / route_a.abs()
        };
        Ok(RouteComparison {
            path_id: p,
            route_a,
            route_b,
            rel_err,
        })
    })
}

/// Columns `path_id,route_a,route_b,rel_err`.
pub fn route_comparison_csv(rows: &[RouteComparison]) -> String {
    let mut out = String::from("path_id,route_a,route_b,rel_err\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.path_id, r.route_a, r.route_b, r.rel_err
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentSign {
    /// `e^{+∫∫ b1 dL}`
    Positive,
    /// `e^{-∫∫ b1 dL}`
    Negative,
}

impl ExponentSign {
    pub fn factor(self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Negative => -1.0,
        }
    }
}

/// Outcome of the one-time self-test that fixes the exponent sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignCalibration {
    pub sign: ExponentSign,
    /// `∫ b1' ds` along the test path.
    pub target: f64,
    /// `∫∫ b1 dL` along the same path.
    pub local_time_integral: f64,
}

/// Sign relating `∫∫ b1 dL^X` to the exponent `∫ b1'(X) ds` of the explicit
/// formula, calibrated once on `b1(x) = -x` over `[0, 0.5]` with `dt = 1e-5`.
pub fn exponent_sign() -> SignCalibration {
    static CAL: OnceLock<SignCalibration> = OnceLock::new();
    *CAL.get_or_init(|| {
        let grid = TimeGrid::new(0.0, 0.5, 50_000).expect("valid grid");
        let b1 = catalog::linear(-1.0);
        let problem = SdeProblem::new(b1.clone(), Arc::new(ZeroRandom), vec![1.0], 0.5, grid)
            .expect("valid problem");
        let path = sample_brownian(grid, 1, StreamId::new(0x5eed, 0)).expect("valid path");
        let states = problem
            .solve_path(&path, 0)
            .expect("linear drift does not explode");
        let n = grid.n_steps();
        let target: f64 = (BAND_STEPS..n)
            .map(|k| b1.eval_dx(grid.time(k), states[k]).unwrap_or(0.0) * grid.dt())
            .sum();
        let lt = lt_via_decomposition_of(
            &SpaceTimeIntegrand::from_drift(&b1),
            &states,
            &grid,
            1.0,
            BAND_STEPS,
            n,
        )
        .expect("window inside grid")
        .value;
        let sign = if (target - lt).abs() <= (target + lt).abs() {
            ExponentSign::Positive
        } else {
            ExponentSign::Negative
        };
        SignCalibration {
            sign,
            target,
            local_time_integral: lt,
        }
    })
}

/// The local-time form of the Malliavin derivative for one problem.
#[derive(Debug, Clone)]
pub struct LocalTimeRepresentation {
    problem: SdeProblem,
    integrand: SpaceTimeIntegrand,
    pub hx_norm: HxNorm,
    pub calibration: SignCalibration,
}

impl LocalTimeRepresentation {
    /// Rejects `b2` depending on `x` and `b1` with an infinite `ℋ^x` norm.
    pub fn new(problem: &SdeProblem) -> Result<Self> {
        if problem.drift2.depends_on_x() {
            return invalid(format!(
                "b2 '{}' depends on x; the local-time representation needs it not to",
                problem.drift2.key()
            ));
        }
        let integrand = SpaceTimeIntegrand::from_drift(&problem.drift1);
        let norm = hx_norm(
            &integrand,
            problem.x0,
            problem.grid.horizon() - problem.grid.t0(),
        )?;
        Ok(Self {
            problem: problem.clone(),
            integrand,
            hx_norm: norm,
            calibration: exponent_sign(),
        })
    }

    /// `D^i_{t_j} X_{t_k}` along `states`, solved on `path`; requires `j >= 10`.
    pub fn derivative(
        &self,
        path: &BrownianPath,
        states: &[f64],
        j: usize,
        k: usize,
        i: usize,
    ) -> Result<f64> {
        let grid = &self.problem.grid;
        if j > k {
            return Ok(0.0);
        }
        if j < BAND_STEPS {
            return invalid(format!("t index {j} lies in the boundary band"));
        }
        if k > grid.n_steps() || i >= self.problem.dim() {
            return invalid("index outside the problem");
        }
        let terms = diffusion_terms(&self.integrand, states, grid, self.problem.sigma_norm_sq())?;
        let sign = self.calibration.sign.factor();
        // E(j, u) = sign ∫_{t_j}^{t_u} ∫ b1 dL, accumulated over u
        let mut cumulative = Vec::with_capacity(k - j + 1);
        let mut acc = 0.0;
        cumulative.push(acc);
        for term in &terms[j..k] {
            acc += sign * term.expect("outside band");
            cumulative.push(acc);
        }
        let total = cumulative[k - j];
        let mut value = self.problem.sigma[i] * total.exp();
        if !self.problem.drift2.is_zero() {
            let b2 = self.problem.drift2.realize(path);
            let dt = grid.dt();
            for u in j..k {
                let db = b2.malliavin(j, u, states[u], i);
                if db != 0.0 {
                    value += db * (total - cumulative[u - j]).exp() * dt;
                }
            }
        }
        Ok(value)
    }
}

/// One-shot form of [`LocalTimeRepresentation::derivative`].
pub fn malliavin_localtime(
    problem: &SdeProblem,
    path: &BrownianPath,
    states: &[f64],
    j: usize,
    k: usize,
    i: usize,
) -> Result<f64> {
    LocalTimeRepresentation::new(problem)?.derivative(path, states, j, k, i)
}

/// Monte Carlo estimate of `E exp(k ∫_0^t ∫ f dL^{B^x})` with `t = t_{b}`,
/// gated to horizons `T <= T1`.
pub fn localtime_exp_moment(
    f: &SpaceTimeIntegrand,
    k: f64,
    x: f64,
    b: usize,
    constants: &SmallTimeConstants,
    noise: &BrownianEnsemble,
) -> Result<MomentCheck> {
    if noise.grid.horizon() > constants.t1 * (1.0 + 1e-12) {
        return invalid(format!(
            "horizon {} exceeds T1 = {}",
            noise.grid.horizon(),
            constants.t1
        ));
    }
    if f.growth() == Growth::Superlinear {
        return invalid(format!("'{}' grows faster than linearly", f.name()));
    }
    let logs = noise.try_map(|_, path| {
        if k == 0.0 {
            return Ok(0.0);
        }
        Ok(k * lt_via_decomposition(f, x, &reverse_path(path), 0, b)?.value)
    })?;
    Ok(exponential_moment(&logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::mollify;
    use crate::malliavin::MalliavinPath;
    use crate::sde::small_time_constants;

    #[test]
    fn hx_norm_of_constants_and_linear() {
        assert_eq!(
            hx_norm(&SpaceTimeIntegrand::zero(), 0.3, 1.0)
                .unwrap()
                .value,
            0.0
        );
        let one = hx_norm(&SpaceTimeIntegrand::constant(1.0), 0.0, 1.0).unwrap();
        let exact = 2.0 + 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((one.value - exact).abs() < 1e-10, "{one:?}");
        let shifted = SpaceTimeIntegrand::new("z-x", Growth::Linear, |_, z| z - 0.7);
        let lin = hx_norm(&shifted, 0.7, 4.0).unwrap();
        assert_eq!(lin.upper, 1.0);
        assert!((lin.value - (2f64.sqrt() + 1.0)).abs() < 1e-10, "{lin:?}");
    }

    #[test]
    fn derivative_route_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(1, 0)).unwrap();
        let b = path.component(0);
        assert_eq!(
            lt_via_derivative(&SpaceTimeIntegrand::constant(3.0), &b, &grid, 0, 1000)
                .unwrap()
                .value,
            0.0
        );
        let v = lt_via_derivative(&SpaceTimeIntegrand::identity(), &b, &grid, 0, 500)
            .unwrap()
            .value;
        assert!((v + 0.5).abs() < 1e-12);
        let v = lt_via_derivative(&SpaceTimeIntegrand::half_square(), &b, &grid, 0, 1000)
            .unwrap()
            .value;
        let riemann: f64 = b[..1000].iter().sum::<f64>() * 1e-3;
        assert!((v + riemann).abs() < 1e-12);
        let no_dz = SpaceTimeIntegrand::new("bare", Growth::Bounded, |_, _| 1.0);
        assert!(lt_via_derivative(&no_dz, &b, &grid, 0, 10).is_err());
    }

    #[test]
    fn decomposition_of_constants_vanishes() {
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(2, 0)).unwrap();
        let rev = reverse_path(&path);
        assert_eq!(
            lt_via_decomposition(&SpaceTimeIntegrand::zero(), 0.0, &rev, 0, 1000)
                .unwrap()
                .value,
            0.0
        );
        let one =
            lt_via_decomposition(&SpaceTimeIntegrand::constant(1.0), 0.0, &rev, 0, 1000).unwrap();
        assert!(one.value.abs() < 1e-12, "{one:?}");
        assert!((one.boundary_band - 0.01).abs() < 1e-15);
    }

    #[test]
    fn routes_agree_pathwise() {
        let grid = TimeGrid::new(0.0, 1.0, 10_000).unwrap();
        let f = SpaceTimeIntegrand::half_square();
        let rows = compare_routes(
            &f,
            3.0,
            &BrownianEnsemble::new(grid, 1, 3, 20).unwrap(),
            10_000,
        )
        .unwrap();
        for r in &rows {
            assert!(r.rel_err < 0.05, "{r:?}");
        }
        assert!(route_comparison_csv(&rows).starts_with("path_id,route_a,route_b,rel_err\n0,"));
    }

    #[test]
    fn both_routes_are_linear_in_f() {
        let grid = TimeGrid::new(0.0, 1.0, 2000).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(4, 0)).unwrap();
        let rev = reverse_path(&path);
        let states: Vec<f64> = path.component(0).iter().map(|v| 0.5 + v).collect();
        let f = SpaceTimeIntegrand::half_square();
        let g = SpaceTimeIntegrand::identity();
        let h = f.scaled(2.0).plus(&g.scaled(-3.0));
        let dec =
            |q: &SpaceTimeIntegrand| lt_via_decomposition(q, 0.5, &rev, 0, 2000).unwrap().value;
        let der = |q: &SpaceTimeIntegrand| {
            lt_via_derivative(q, &states, &grid, 10, 2000)
                .unwrap()
                .value
        };
        assert!((dec(&h) - (2.0 * dec(&f) - 3.0 * dec(&g))).abs() < 1e-10);
        assert!((der(&h) - (2.0 * der(&f) - 3.0 * der(&g))).abs() < 1e-10);
    }

    #[test]
    fn localisation() {
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(5, 0)).unwrap();
        let far = path.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let f =
            SpaceTimeIntegrand::new(
                "far",
                Growth::Bounded,
                move |_, z: f64| if z.abs() > far { z } else { 0.0 },
            )
            .with_derivative(move |_, z: f64| if z.abs() > far { 1.0 } else { 0.0 });
        assert_eq!(
            lt_via_decomposition(&f, 0.0, &reverse_path(&path), 0, 1000)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            lt_via_derivative(&f, &path.component(0), &grid, 0, 1000)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn calibration_selects_negative_exponent() {
        let cal = exponent_sign();
        assert_eq!(cal.sign, ExponentSign::Negative);
        assert!((cal.target + cal.local_time_integral).abs() < 1e-2 * cal.target.abs());
    }

    #[test]
    fn representation_reduces_without_b1() {
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let p = SdeProblem::new(
            catalog::zero(),
            Arc::new(catalog::wiener_integral(1.0)),
            vec![1.0],
            0.0,
            grid,
        )
        .unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(6, 0)).unwrap();
        let x = p.solve_path(&path, 0).unwrap();
        let v = malliavin_localtime(&p, &path, &x, 100, 900, 0).unwrap();
        assert!((v - 1.8).abs() < 1e-12);
        assert_eq!(
            malliavin_localtime(&p, &path, &x, 900, 100, 0).unwrap(),
            0.0
        );
        assert!(malliavin_localtime(&p, &path, &x, 5, 100, 0).is_err());
    }

    #[test]
    fn representation_rejects_x_dependent_b2() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let p = SdeProblem::new(
            catalog::zero(),
            Arc::new(catalog::tanh_shifted_noise()),
            vec![1.0],
            0.0,
            grid,
        )
        .unwrap();
        assert!(LocalTimeRepresentation::new(&p).is_err());
    }

    #[test]
    fn representation_matches_explicit_for_smooth_drift() {
        let grid = TimeGrid::new(0.0, 0.5, 50_000).unwrap();
        let b1 = mollify(&catalog::sine(1.0), 5);
        let p = SdeProblem::new(b1, Arc::new(catalog::tanh_noise()), vec![1.0], 0.2, grid).unwrap();
        let rep = LocalTimeRepresentation::new(&p).unwrap();
        for s in 0..3 {
            let path = sample_brownian(grid, 1, StreamId::new(7, s)).unwrap();
            let mp = MalliavinPath::new(&p, &path, 0).unwrap();
            let lt = rep.derivative(&path, mp.states(), 1000, 50_000, 0).unwrap();
            let ex = mp.derivative(1000, 50_000, 0);
            assert!((lt - ex).abs() < 1e-2 * ex.abs(), "{lt} vs {ex}");
        }
    }

    #[test]
    fn exponential_moment_trivial_cases() {
        let c = small_time_constants(1.0, 1, &[1.0], 0.1).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 100).unwrap();
        let ens = BrownianEnsemble::new(grid, 1, 0, 200).unwrap();
        let z = localtime_exp_moment(&SpaceTimeIntegrand::zero(), 2.0, 0.0, 100, &c, &ens).unwrap();
        assert_eq!(z.estimate, 1.0);
        let k0 =
            localtime_exp_moment(&SpaceTimeIntegrand::identity(), 0.0, 0.0, 100, &c, &ens).unwrap();
        assert_eq!(k0.estimate, 1.0);
        let long = BrownianEnsemble::new(TimeGrid::new(0.0, 1.0, 100).unwrap(), 1, 0, 2).unwrap();
        assert!(
            localtime_exp_moment(&SpaceTimeIntegrand::identity(), 1.0, 0.0, 100, &c, &long)
                .is_err()
        );
    }
}
