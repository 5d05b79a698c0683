//! Spatial flow derivative `∂_x X^{s,x}_t`, weighted Sobolev norms of the
//! flow and Hölder diagnostics in `(s, x)`.
//!
//! For smooth drifts `∂_x X^{s,x}_t = exp(∫_s^t (b1' + b2')(u, X_u) du)`,
//! evaluated with left-point sums. Irregular drifts are handled through a
//! mollified level, which is recorded with every report.

use std::sync::Arc;

use serde::Serialize;

use crate::drift::PathDrift;
use crate::error::{invalid, Error, Result};
use crate::paths::{BrownianEnsemble, BrownianPath};
use crate::quadrature::GaussLegendre;
use crate::sde::SdeProblem;
use crate::stats::{linear_fit, Estimate};

/// Weights below this are dropped from the x quadrature.
pub const WEIGHT_CUTOFF: f64 = 1e-16;

/// `c` values checked before a Sobolev norm is computed.
pub const DEFAULT_C_LIST: [f64; 3] = [0.0, 1.0, 10.0];

/// Rejects horizons beyond `T1 = 1 / (4 √3 d k1²)`; drifts with `k1 = 0` pass.
pub fn small_time_gate(problem: &SdeProblem) -> Result<()> {
    let k1 = problem.drift1.growth();
    if k1 == 0.0 {
        return Ok(());
    }
    let t1 = 1.0 / (4.0 * 3f64.sqrt() * problem.dim() as f64 * k1 * k1);
    let span = problem.grid.horizon() - problem.grid.t0();
    if span > t1 * (1.0 + 1e-12) {
        return invalid(format!("horizon {span} exceeds T1 = {t1} for k1 = {k1}"));
    }
    Ok(())
}

/// `X^{t_start, x}` together with the running log flow derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub start: usize,
    pub states: Vec<f64>,
    /// `log ∂_x X` at each grid point from `start`; entry `0` is `0`.
    log_derivative: Vec<f64>,
}

impl FlowPath {
    pub fn new(
        problem: &SdeProblem,
        path: &BrownianPath,
        b2: &dyn PathDrift,
        start: usize,
        x: f64,
        path_index: usize,
    ) -> Result<Self> {
        let (states, slopes) = problem.solve_linearized(path, b2, start, x, path_index)?;
        let dt = problem.grid.dt();
        let mut log_derivative = Vec::with_capacity(states.len());
        let mut acc = 0.0;
        log_derivative.push(acc);
        for s in slopes {
            acc += s * dt;
            log_derivative.push(acc);
        }
        Ok(Self {
            start,
            states,
            log_derivative,
        })
    }

    /// `X_{t_k}` for `k >= start`.
    pub fn value(&self, k: usize) -> f64 {
        self.states[k - self.start]
    }

    /// `∂_x X^{t_start, x}_{t_k}`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.log_derivative[k - self.start].exp()
    }

    /// `∂_x X^{t_u, X_{t_u}}_{t_k}` along this path.
    pub fn derivative_between(&self, u: usize, k: usize) -> f64 {
        (self.log_derivative[k - self.start] - self.log_derivative[u - self.start]).exp()
    }
}

/// `exp(Σ_{k=start}^{end-1} (b1' + b2')(t_k, X_k) dt)` along `states`, which
/// start at grid index `start`.
pub fn flow_derivative_explicit(
    problem: &SdeProblem,
    b2: &dyn PathDrift,
    states: &[f64],
    start: usize,
    end: usize,
) -> Result<f64> {
    if start > end || end - start >= states.len() {
        return invalid(format!(
            "need start <= end within the solution, got [{start}, {end}]"
        ));
    }
    let grid = &problem.grid;
    let mut exponent = 0.0;
    for k in start..end {
        let x = states[k - start];
        let b1 = problem.drift1.eval_dx(grid.time(k), x).ok_or_else(|| {
            Error::MissingDerivative(format!(
                "b1 '{}' has no spatial derivative",
                problem.drift1.name()
            ))
        })?;
        exponent += (b1 + b2.eval_dx(k, x)) * grid.dt();
    }
    Ok(exponent.exp())
}

/// `(X^{s, x+ε}_t - X^{s, x-ε}_t) / (2ε)` on the same noise.
pub fn flow_derivative_fd(
    problem: &SdeProblem,
    path: &BrownianPath,
    start: usize,
    x: f64,
    end: usize,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return invalid("ε must be positive");
    }
    if start > end || end > problem.grid.n_steps() {
        return invalid(format!(
            "need start <= end <= n_steps, got [{start}, {end}]"
        ));
    }
    let b2 = problem.drift2.realize(path);
    let up = problem.solve_from(path, b2.as_ref(), start, x + eps, 0)?;
    let down = problem.solve_from(path, b2.as_ref(), start, x - eps, 0)?;
    Ok((up[end - start] - down[end - start]) / (2.0 * eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowMomentRow {
    pub x: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowMomentTable {
    pub p: f64,
    pub rows: Vec<FlowMomentRow>,
    /// Least-squares fit `log E = intercept + slope |x|²`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Monte Carlo `E |∂_x X^{s,x}_t|^p` for each `x` in `xs`.
pub fn flow_moment_bound(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    p: f64,
    xs: &[f64],
    start: usize,
    end: usize,
) -> Result<FlowMomentTable> {
    if !(p >= 1.0) {
        return invalid("p must be at least 1");
    }
    small_time_gate(problem)?;
    if start > end || end > problem.grid.n_steps() {
        return invalid("need start <= end <= n_steps");
    }
    let samples = noise.try_map(|idx, path| {
        let b2 = problem.drift2.realize(path);
        xs.iter()
            .map(|&x| {
                Ok(FlowPath::new(problem, path, b2.as_ref(), start, x, idx)?
                    .derivative(end)
                    .powf(p))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows: Vec<FlowMomentRow> = xs
        .iter()
        .enumerate()
        .map(|(m, &x)| {
            let e = Estimate::from_samples(&samples.iter().map(|s| s[m]).collect::<Vec<f64>>());
            FlowMomentRow {
                x,
                mean: e.mean,
                se: e.se,
            }
        })
        .collect();
    let fit = linear_fit(
        &xs.iter().map(|x| x * x).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.mean.ln()).collect::<Vec<_>>(),
    );
    Ok(FlowMomentTable {
        p,
        rows,
        slope: fit.map(|f| f.1),
        intercept: fit.map(|f| f.0),
    })
}

type LogWeight = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A positive weight `w`, stored as `log w`.
#[derive(Clone)]
pub struct WeightFunction {
    id: String,
    log_w: LogWeight,
    support: Option<(f64, f64)>,
}

impl std::fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightFunction")
            .field("id", &self.id)
            .field("support", &self.support)
            .finish()
    }
}

impl WeightFunction {
    pub fn new(id: impl Into<String>, log_w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            id: id.into(),
            log_w: Arc::new(log_w),
            support: None,
        }
    }

    /// `exp(-x⁴)`, the default.
    pub fn quartic() -> Self {
        Self::new("exp(-x^4)", |x| -x.powi(4))
    }

    /// `exp(-a x²)`
    pub fn gaussian(a: f64) -> Self {
        Self::new(format!("exp(-{a}x^2)"), move |x| -a * x * x)
    }

    /// Indicator of `[lo, hi]`.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self {
            id: format!("1[{lo},{hi}]"),
            log_w: Arc::new(move |x| {
                if (lo..=hi).contains(&x) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }),
            support: Some((lo, hi)),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn log_eval(&self, x: f64) -> f64 {
        (self.log_w)(x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.log_eval(x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckedC {
    pub c: f64,
    /// `log ∫ e^{c x²} w dx`, `None` when the integral diverges.
    pub log_integral: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityCertificate {
    pub weight_id: String,
    pub checked: Vec<CheckedC>,
    pub admissible: bool,
}

/// Checks `∫ e^{c x²} w(x) dx < ∞` for every `c` in `c_list`.
///
/// The truncation radius doubles from 4 to 64 until the integrand at `±R`
/// is below `1e-16` of its maximum; if that never happens the integral is
/// declared divergent.
pub fn weight_admissibility(w: &WeightFunction, c_list: &[f64]) -> AdmissibilityCertificate {
    let gl = GaussLegendre::new(20);
    let checked = c_list
        .iter()
        .map(|&c| {
            let log_g = |x: f64| c * x * x + w.log_eval(x);
            let integrate = |lo: f64, hi: f64| {
                let peak = (0..=4000)
                    .map(|m| log_g(lo + (hi - lo) * m as f64 / 4000.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                let panels = ((hi - lo) * 8.0).ceil().max(1.0) as usize;
                let rest = gl.integrate_composite(lo, hi, panels, |x| (log_g(x) - peak).exp());
                peak + rest.ln()
            };
            let log_integral = match w.support {
                Some((lo, hi)) => Some(integrate(lo, hi)),
                None => [4.0, 8.0, 16.0, 32.0, 64.0].iter().find_map(|&r| {
                    let peak = (0..=4000)
                        .map(|m| log_g(-r + 2.0 * r * m as f64 / 4000.0))
                        .fold(f64::NEG_INFINITY, f64::max);
                    let edge = log_g(r).max(log_g(-r));
                    (edge < peak + WEIGHT_CUTOFF.ln()).then(|| integrate(-r, r))
                }),
            };
            CheckedC {
                c,
                log_integral: log_integral.filter(|v| v.is_finite() || *v == f64::NEG_INFINITY),
            }
        })
        .collect::<Vec<_>>();
    let admissible = checked.iter().all(|c| c.log_integral.is_some());
    AdmissibilityCertificate {
        weight_id: w.id.clone(),
        checked,
        admissible,
    }
}

/// Uniform x grid for the Sobolev quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for XGrid {
    fn default() -> Self {
        Self {
            lo: -6.0,
            hi: 6.0,
            n: 481,
        }
    }
}

impl XGrid {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, m: usize) -> f64 {
        self.lo + m as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevReport {
    pub p: f64,
    pub weight_id: String,
    pub norm_estimate: f64,
    pub se: f64,
    pub x_grid: XGrid,
    pub mollification_level: Option<u32>,
    pub n_paths: usize,
    /// Grid points left after dropping weights below the cutoff.
    pub points_used: usize,
}

/// Per-path values `((∫ |X^x_T|^p w dx)^{1/p} + (∫ |∂_x X^x_T|^p w dx)^{1/p})²`,
/// with the trapezoid rule on `x_grid` restricted to `w >= 1e-16`. Returns the
/// values and the number of grid points used.
pub fn weighted_sobolev_samples(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    w: &WeightFunction,
    p: f64,
    x_grid: XGrid,
) -> Result<(Vec<f64>, usize)> {
    if !(p >= 2.0) {
        return invalid("p must be at least 2");
    }
    if x_grid.n < 2 || !(x_grid.hi > x_grid.lo) {
        return invalid("x grid needs two or more points on a non-empty interval");
    }
    let cert = weight_admissibility(w, &DEFAULT_C_LIST);
    if !cert.admissible {
        return invalid(format!("weight '{}' is not admissible", w.id()));
    }
    small_time_gate(problem)?;
    let dx = x_grid.spacing();
    let nodes: Vec<(f64, f64)> = (0..x_grid.n)
        .filter_map(|m| {
            let x = x_grid.point(m);
            let weight = w.eval(x);
            let end = if m == 0 || m == x_grid.n - 1 {
                0.5
            } else {
                1.0
            };
            (weight >= WEIGHT_CUTOFF).then_some((x, weight * end * dx))
        })
        .collect();
    let end = problem.grid.n_steps();
    let values = noise.try_map(|idx, path| {
        let b2 = problem.drift2.realize(path);
        let (mut value_int, mut deriv_int) = (0.0, 0.0);
        for &(x, q) in &nodes {
            let flow = FlowPath::new(problem, path, b2.as_ref(), 0, x, idx)?;
            value_int += q * flow.value(end).abs().powf(p);
            deriv_int += q * flow.derivative(end).powf(p);
        }
        Ok((value_int.powf(1.0 / p) + deriv_int.powf(1.0 / p)).powi(2))
    })?;
    Ok((values, nodes.len()))
}

/// Monte Carlo estimate of
/// `E[((∫ |X^x_T|^p w dx)^{1/p} + (∫ |∂_x X^x_T|^p w dx)^{1/p})²]`.
pub fn weighted_sobolev_norm(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    w: &WeightFunction,
    p: f64,
    x_grid: XGrid,
) -> Result<SobolevReport> {
    let (values, points_used) = weighted_sobolev_samples(problem, noise, w, p, x_grid)?;
    let est = Estimate::from_samples(&values);
    if !est.mean.is_finite() {
        return Err(Error::Divergent("weighted Sobolev norm".into()));
    }
    Ok(SobolevReport {
        p,
        weight_id: w.id().to_string(),
        norm_estimate: est.mean,
        se: est.se,
        x_grid,
        mollification_level: problem.drift1.level(),
        n_paths: noise.n_paths,
        points_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapMoment {
    pub gap: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderFlowFit {
    pub p: f64,
    pub s_points: Vec<GapMoment>,
    pub x_points: Vec<GapMoment>,
    /// Log-log slope in `|s1 - s2|`; about `p / 2` is expected.
    pub s_slope: Option<f64>,
    /// Log-log slope in `|x1 - x2|`; about `p` is expected.
    pub x_slope: Option<f64>,
}

fn log_log_slope(points: &[GapMoment]) -> Option<f64> {
    let used: Vec<&GapMoment> = points
        .iter()
        .filter(|g| g.gap > 0.0 && g.mean > 0.0)
        .collect();
    let xs: Vec<f64> = used.iter().map(|g| g.gap.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|g| g.mean.ln()).collect();
    linear_fit(&xs, &ys).map(|f| f.1)
}

/// `E |X^{s1,x1}_t - X^{s2,x2}_t|^p` over start-index gaps (at fixed `x`) and
/// space gaps (at fixed `s`), both measured from `(s, x)`, with `t = t_end`.
#[allow(clippy::too_many_arguments)]
pub fn holder_flow_diagnostic(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    p: f64,
    s: usize,
    x: f64,
    s_gaps: &[usize],
    x_gaps: &[f64],
    end: usize,
) -> Result<HolderFlowFit> {
    if !(p >= 2.0) {
        return invalid("p must be at least 2");
    }
    if problem.drift2.m2_bound().is_none() {
        return invalid(format!(
            "b2 '{}' has no deterministic M2 bound",
            problem.drift2.key()
        ));
    }
    if end > problem.grid.n_steps() || s_gaps.iter().any(|g| s + g > end) {
        return invalid("every start time must lie before the end time");
    }
    let samples = noise.try_map(|idx, path| {
        let b2 = problem.drift2.realize(path);
        let base = problem.solve_from(path, b2.as_ref(), s, x, idx)?[end - s];
        let mut out = Vec::with_capacity(s_gaps.len() + x_gaps.len());
        for &g in s_gaps {
            let other = problem.solve_from(path, b2.as_ref(), s + g, x, idx)?[end - s - g];
            out.push((base - other).abs().powf(p));
        }
        for &g in x_gaps {
            let other = problem.solve_from(path, b2.as_ref(), s, x + g, idx)?[end - s];
            out.push((base - other).abs().powf(p));
        }
        Ok(out)
    })?;
    let moment = |m: usize, gap: f64| {
        let e = Estimate::from_samples(&samples.iter().map(|v| v[m]).collect::<Vec<f64>>());
        GapMoment {
            gap,
            mean: e.mean,
            se: e.se,
        }
    };
    let dt = problem.grid.dt();
    let s_points: Vec<GapMoment> = s_gaps
        .iter()
        .enumerate()
        .map(|(m, &g)| moment(m, g as f64 * dt))
        .collect();
    let x_points: Vec<GapMoment> = x_gaps
        .iter()
        .enumerate()
        .map(|(m, &g)| moment(s_gaps.len() + m, g.abs()))
        .collect();
    Ok(HolderFlowFit {
        p,
        s_slope: log_log_slope(&s_points),
        x_slope: log_log_slope(&x_points),
        s_points,
        x_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{catalog, mollify, ZeroRandom};
    use crate::paths::{sample_brownian, StreamId, TimeGrid};

    fn problem(
        b1: crate::drift::DeterministicDrift,
        b2: Arc<dyn crate::drift::RandomDrift>,
        t: f64,
        n: usize,
    ) -> SdeProblem {
        SdeProblem::new(b1, b2, vec![1.0], 0.3, TimeGrid::new(0.0, t, n).unwrap()).unwrap()
    }

    #[test]
    fn explicit_closed_forms() {
        let p = problem(catalog::zero(), Arc::new(ZeroRandom), 1.0, 200);
        let path = sample_brownian(p.grid, 1, StreamId::new(1, 0)).unwrap();
        let f = FlowPath::new(&p, &path, &*p.drift2.realize(&path), 20, 0.4, 0).unwrap();
        assert_eq!(f.derivative(200), 1.0);
        let ou = problem(catalog::linear(-0.7), Arc::new(ZeroRandom), 1.0, 200);
        let b2 = ou.drift2.realize(&path);
        let x = ou.solve_from(&path, b2.as_ref(), 20, 0.4, 0).unwrap();
        let v = flow_derivative_explicit(&ou, b2.as_ref(), &x, 20, 200).unwrap();
        assert!((v - (-0.7 * 0.9f64).exp()).abs() < 1e-12);
        let tanh = problem(catalog::zero(), Arc::new(catalog::tanh_noise()), 1.0, 200);
        let b2 = tanh.drift2.realize(&path);
        let x = tanh.solve_from(&path, b2.as_ref(), 0, 0.0, 0).unwrap();
        assert_eq!(
            flow_derivative_explicit(&tanh, b2.as_ref(), &x, 0, 200).unwrap(),
            1.0
        );
        let rough = problem(catalog::sign(1.0), Arc::new(ZeroRandom), 1.0, 200);
        assert!(matches!(
            flow_derivative_explicit(&rough, b2.as_ref(), &x, 0, 200),
            Err(Error::MissingDerivative(_))
        ));
    }

    #[test]
    fn finite_difference_oracle() {
        let path = sample_brownian(
            TimeGrid::new(0.0, 1.0, 1000).unwrap(),
            1,
            StreamId::new(2, 0),
        )
        .unwrap();
        let zero = problem(catalog::zero(), Arc::new(ZeroRandom), 1.0, 1000);
        assert!(
            (flow_derivative_fd(&zero, &path, 0, 0.1, 1000, 1e-4).unwrap() - 1.0).abs() < 1e-10
        );
        let ou = problem(catalog::linear(-1.0), Arc::new(ZeroRandom), 1.0, 1000);
        let fd = flow_derivative_fd(&ou, &path, 100, 0.1, 1000, 1e-4).unwrap();
        assert!((fd - (-0.9f64).exp()).abs() < 1e-3);
        assert!(flow_derivative_fd(&ou, &path, 0, 0.1, 1000, 0.0).is_err());
        // at level 1000, |b1'| reaches a few thousand, so dt must be far below 1e-3
        let sign = problem(
            mollify(&catalog::sign(1.0), 1000),
            Arc::new(catalog::tanh_shifted_noise()),
            1e-3,
            10_000,
        );
        for seed in 0..3 {
            let path = sample_brownian(sign.grid, 1, StreamId::new(3, seed)).unwrap();
            let b2 = sign.drift2.realize(&path);
            let flow = FlowPath::new(&sign, &path, b2.as_ref(), 0, 0.0, 0).unwrap();
            let fd = flow_derivative_fd(&sign, &path, 0, 0.0, 10_000, 1e-7).unwrap();
            let ex = flow.derivative(10_000);
            assert!(ex < 0.99, "path never met the kink: {ex}");
            assert!((fd - ex).abs() < 1e-2 * ex, "{fd} vs {ex}");
        }
    }

    #[test]
    fn cocycle_and_positivity() {
        let p = problem(
            mollify(&catalog::sine(2.0), 10),
            Arc::new(catalog::tanh_shifted_noise()),
            1.0,
            500,
        );
        let path = sample_brownian(p.grid, 1, StreamId::new(4, 0)).unwrap();
        let f = FlowPath::new(&p, &path, &*p.drift2.realize(&path), 0, 0.2, 0).unwrap();
        let whole = f.derivative(500);
        assert!(whole > 0.0);
        assert!((f.derivative(200) * f.derivative_between(200, 500) - whole).abs() < 1e-12 * whole);
    }

    #[test]
    fn moment_table_closed_forms() {
        let ens = BrownianEnsemble::new(TimeGrid::new(0.0, 0.1, 50).unwrap(), 1, 5, 20).unwrap();
        let xs = [-1.0, 0.0, 1.0, 2.0];
        let zero = problem(catalog::zero(), Arc::new(ZeroRandom), 0.1, 50);
        let t = flow_moment_bound(&zero, &ens, 2.0, &xs, 0, 50).unwrap();
        assert!(t.rows.iter().all(|r| r.mean == 1.0));
        assert_eq!(t.slope, Some(0.0));
        let ou = problem(catalog::linear(-1.0), Arc::new(ZeroRandom), 0.1, 50);
        let t = flow_moment_bound(&ou, &ens, 2.0, &xs, 0, 50).unwrap();
        assert!(t
            .rows
            .iter()
            .all(|r| (r.mean - (-0.2f64).exp()).abs() < 1e-12));
        assert!(t.slope.unwrap().abs() < 1e-12);
        let long = problem(catalog::linear(-1.0), Arc::new(ZeroRandom), 1.0, 50);
        assert!(flow_moment_bound(&long, &ens, 2.0, &xs, 0, 50).is_err());
    }

    #[test]
    fn admissibility_examples() {
        let q = weight_admissibility(&WeightFunction::quartic(), &[10.0]);
        assert!(q.admissible);
        // the integrand peaks at x² = 5 with value e^{25}
        assert!((q.checked[0].log_integral.unwrap() - 25.0).abs() < 2.0);
        assert!(!weight_admissibility(&WeightFunction::gaussian(1.0), &[2.0]).admissible);
        assert!(!weight_admissibility(&WeightFunction::gaussian(1.0), &[1.0]).admissible);
        assert!(weight_admissibility(&WeightFunction::gaussian(1.0), &[0.5]).admissible);
        let ind = weight_admissibility(&WeightFunction::indicator(-1.0, 1.0), &[100.0]);
        assert!(ind.admissible);
        let quartic = weight_admissibility(&WeightFunction::quartic(), &[0.0]).checked[0]
            .log_integral
            .unwrap();
        // ∫ e^{-x⁴} dx = Γ(1/4) / 2
        assert!((quartic.exp() - 1.812_804_954_110_954).abs() < 1e-9);
    }

    #[test]
    fn sobolev_norm_of_zero_drift() {
        let p = problem(catalog::zero(), Arc::new(ZeroRandom), 0.5, 10);
        let ens = BrownianEnsemble::new(p.grid, 1, 6, 50).unwrap();
        let r = weighted_sobolev_norm(&p, &ens, &WeightFunction::quartic(), 2.0, XGrid::default())
            .unwrap();
        // ∫ x² e^{-x⁴} = Γ(3/4) / 2 and ∫ e^{-x⁴} = Γ(1/4) / 2
        let (m2, m0) = (0.612_708_351_232_862_6, 1.812_804_954_110_954);
        let exact: Vec<f64> = (0..50)
            .map(|i| {
                let b = ens.path(i).value(10, 0);
                ((m2 + b * b * m0).sqrt() + m0.sqrt()).powi(2)
            })
            .collect();
        let oracle = crate::stats::mean(&exact);
        assert!(
            (r.norm_estimate - oracle).abs() < 1e-9 * oracle,
            "{} vs {oracle}",
            r.norm_estimate
        );
        assert_eq!(r.mollification_level, None);
        assert!(r.points_used < 481);
    }

    #[test]
    fn sobolev_truncation_is_monotone_and_local() {
        let p = problem(catalog::linear(-1.0), Arc::new(ZeroRandom), 0.1, 20);
        let ens = BrownianEnsemble::new(p.grid, 1, 7, 20).unwrap();
        let w = WeightFunction::quartic();
        let small = weighted_sobolev_norm(
            &p,
            &ens,
            &w,
            2.0,
            XGrid {
                lo: -3.0,
                hi: 3.0,
                n: 241,
            },
        )
        .unwrap();
        let large = weighted_sobolev_norm(&p, &ens, &w, 2.0, XGrid::default()).unwrap();
        assert!(large.norm_estimate >= small.norm_estimate);
        let narrow = |d: f64| {
            weighted_sobolev_norm(
                &p,
                &ens,
                &WeightFunction::indicator(-d, d),
                2.0,
                XGrid {
                    lo: -1.0,
                    hi: 1.0,
                    n: 2001,
                },
            )
            .unwrap()
            .norm_estimate
        };
        let ratio = narrow(0.02) / narrow(0.01);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
        assert!(weighted_sobolev_norm(
            &p,
            &ens,
            &WeightFunction::gaussian(1.0),
            2.0,
            XGrid::default()
        )
        .is_err());
        assert!(weighted_sobolev_norm(&p, &ens, &w, 1.0, XGrid::default()).is_err());
    }

    #[test]
    fn holder_closed_forms() {
        let ens =
            BrownianEnsemble::new(TimeGrid::new(0.0, 1.0, 1000).unwrap(), 1, 8, 4000).unwrap();
        let zero = problem(catalog::zero(), Arc::new(ZeroRandom), 1.0, 1000);
        let fit = holder_flow_diagnostic(
            &zero,
            &ens,
            2.0,
            100,
            0.0,
            &[0, 10, 20, 40, 80, 160],
            &[],
            1000,
        )
        .unwrap();
        assert_eq!(fit.s_points[0].mean, 0.0);
        assert!((fit.s_slope.unwrap() - 1.0).abs() < 0.1, "{fit:?}");
        let ou = problem(catalog::linear(-1.0), Arc::new(ZeroRandom), 1.0, 1000);
        let small = BrownianEnsemble::new(ou.grid, 1, 8, 5).unwrap();
        let fit =
            holder_flow_diagnostic(&ou, &small, 2.0, 0, 0.0, &[], &[0.0, 0.01, 0.1, 1.0], 1000)
                .unwrap();
        assert_eq!(fit.x_points[0].mean, 0.0);
        assert!((fit.x_slope.unwrap() - 2.0).abs() < 1e-9);
        let wiener = problem(
            catalog::zero(),
            Arc::new(catalog::wiener_integral(1.0)),
            1.0,
            1000,
        );
        assert!(holder_flow_diagnostic(&wiener, &small, 2.0, 0, 0.0, &[1], &[], 1000).is_err());
    }
}
