//! Pathwise Euler–Maruyama solutions of
//! `dX_t = (b1(t, X_t) + b2(t, X_t, ω)) dt + σ · dB_t`.
//!
//! With additive noise the left-point Euler scheme has strong order one for
//! Lipschitz drifts. Irregular drifts are meant to be run through a
//! [`MollifiedFamily`]; solving with a non-smooth `b1` directly is allowed and
//! is labelled as outside the construction in the resulting [`SolutionGrid`].

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::drift::{DeterministicDrift, MollifiedFamily, PathDrift, RandomDrift};
use crate::error::{invalid, Error, Result};
use crate::paths::{BrownianEnsemble, BrownianPath, TimeGrid};
use crate::stats::{exponential_moment, Estimate, MomentCheck};

/// States beyond this magnitude count as an explosion.
pub const EXPLOSION_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SdeProblem {
    pub drift1: DeterministicDrift,
    pub drift2: Arc<dyn RandomDrift>,
    pub sigma: Vec<f64>,
    pub x0: f64,
    pub grid: TimeGrid,
}

impl SdeProblem {
    pub fn new(
        drift1: DeterministicDrift,
        drift2: Arc<dyn RandomDrift>,
        sigma: Vec<f64>,
        x0: f64,
        grid: TimeGrid,
    ) -> Result<Self> {
        let s2: f64 = sigma.iter().map(|s| s * s).sum();
        if sigma.is_empty() || !(s2 > 0.0) || !s2.is_finite() {
            return invalid("diffusion vector must satisfy |σ|² > 0");
        }
        if !x0.is_finite() {
            return invalid("initial value must be finite");
        }
        Ok(Self {
            drift1,
            drift2,
            sigma,
            x0,
            grid,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma_norm_sq(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }

    /// Same problem with `b1` replaced.
    pub fn with_drift1(&self, drift1: DeterministicDrift) -> Self {
        Self {
            drift1,
            ..self.clone()
        }
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        Self { x0, ..self.clone() }
    }

    fn check_noise(&self, path: &BrownianPath) -> Result<()> {
        if path.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "noise grid differs from problem grid".into(),
            ));
        }
        if path.dim() != self.dim() {
            return Err(Error::GridMismatch(format!(
                "noise dimension {} but σ has {} components",
                path.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Solution on the whole grid started from `x0`.
    pub fn solve_path(&self, path: &BrownianPath, path_index: usize) -> Result<Vec<f64>> {
        self.check_noise(path)?;
        let b2 = self.drift2.realize(path);
        self.solve_from(path, b2.as_ref(), 0, self.x0, path_index)
    }

    /// `X^{t_start, x}` on grid points `start..=n_steps`; entry `0` is `x`.
    pub fn solve_from(
        &self,
        path: &BrownianPath,
        b2: &dyn PathDrift,
        start: usize,
        x: f64,
        path_index: usize,
    ) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let n = grid.n_steps();
        let dt = grid.dt();
        let mut out = Vec::with_capacity(n + 1 - start);
        let mut state = x;
        out.push(state);
        for k in start..n {
            let t = grid.time(k);
            let noise: f64 = self
                .sigma
                .iter()
                .enumerate()
                .map(|(i, s)| s * path.increment(k, i))
                .sum();
            state += (self.drift1.eval(t, state) + b2.eval(k, state)) * dt + noise;
            if !state.is_finite() || state.abs() > EXPLOSION_THRESHOLD {
                return Err(Error::ExplosionDetected {
                    path: path_index,
                    step: k + 1,
                    value: state,
                });
            }
            out.push(state);
        }
        Ok(out)
    }

    /// Like [`SdeProblem::solve_from`], also returning `∂_x (b1 + b2)` at the
    /// left end of every step along the solution.
    pub fn solve_linearized(
        &self,
        path: &BrownianPath,
        b2: &dyn PathDrift,
        start: usize,
        x: f64,
        path_index: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.drift1.is_smooth() {
            return Err(Error::MissingDerivative(format!(
                "b1 '{}' has no spatial derivative",
                self.drift1.name()
            )));
        }
        let grid = &self.grid;
        let n = grid.n_steps();
        let dt = grid.dt();
        let mut values = Vec::with_capacity(n + 1 - start);
        let mut slopes = Vec::with_capacity(n - start);
        let mut state = x;
        values.push(state);
        for k in start..n {
            let t = grid.time(k);
            let (b1, b1_dx) = self.drift1.eval_with_dx(t, state).expect("checked smooth");
            slopes.push(b1_dx + b2.eval_dx(k, state));
            let noise: f64 = self
                .sigma
                .iter()
                .enumerate()
                .map(|(i, s)| s * path.increment(k, i))
                .sum();
            state += (b1 + b2.eval(k, state)) * dt + noise;
            if !state.is_finite() || state.abs() > EXPLOSION_THRESHOLD {
                return Err(Error::ExplosionDetected {
                    path: path_index,
                    step: k + 1,
                    value: state,
                });
            }
            values.push(state);
        }
        Ok((values, slopes))
    }
}

/// Solution values per path and grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub grid: TimeGrid,
    pub values: Vec<Vec<f64>>,
    /// Mollification level of `b1`, when it came from a family.
    pub level: Option<u32>,
    pub seed: u64,
    pub first_stream: u64,
    /// `b1` was evaluated without derivative information (not mollified).
    pub outside_construction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub second_moment: f64,
}

impl SolutionGrid {
    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    /// Cross-section `X_{t_k}` over paths.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|p| p[k]).collect()
    }

    pub fn moments(&self) -> Vec<MomentRow> {
        (0..self.grid.n_points())
            .map(|k| {
                let col = self.column(k);
                let e = Estimate::from_samples(&col);
                let sq: Vec<f64> = col.iter().map(|x| x * x).collect();
                MomentRow {
                    t: self.grid.time(k),
                    mean: e.mean,
                    se: e.se,
                    second_moment: crate::stats::mean(&sq),
                }
            })
            .collect()
    }

    /// CSV with columns `path_id, t, X`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("path_id,t,X\n");
        for (p, row) in self.values.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    self.first_stream + p as u64,
                    self.grid.time(k),
                    x
                );
            }
        }
        s
    }
}

pub fn euler_maruyama(problem: &SdeProblem, noise: &BrownianEnsemble) -> Result<SolutionGrid> {
    if noise.grid != problem.grid || noise.d != problem.dim() {
        return Err(Error::GridMismatch(
            "ensemble does not match problem grid".into(),
        ));
    }
    let values = noise.try_map(|i, path| problem.solve_path(path, i))?;
    Ok(SolutionGrid {
        grid: problem.grid,
        values,
        level: problem.drift1.level(),
        seed: noise.seed,
        first_stream: noise.first_stream,
        outside_construction: !problem.drift1.is_smooth(),
    })
}

/// One solution per level, all on the same noise.
pub fn solve_mollified_sequence(
    family: &MollifiedFamily,
    drift2: Arc<dyn RandomDrift>,
    sigma: &[f64],
    x0: f64,
    noise: &BrownianEnsemble,
    levels: &[u32],
) -> Result<Vec<SolutionGrid>> {
    if levels.is_empty() {
        return invalid("at least one mollification level is required");
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("levels must be strictly increasing");
    }
    levels
        .iter()
        .map(|&n| {
            let problem = SdeProblem::new(
                family.level(n),
                drift2.clone(),
                sigma.to_vec(),
                x0,
                noise.grid,
            )?;
            euler_maruyama(&problem, noise)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyReport {
    pub t: f64,
    pub levels: Vec<Option<u32>>,
    /// `(E |X^m_t - X^n_t|²)^{1/2}`
    pub distances: Vec<Vec<f64>>,
    /// Distance between the two finest levels.
    pub tail: f64,
}

pub fn cauchy_l2_diagnostic(solutions: &[SolutionGrid], t: f64) -> Result<CauchyReport> {
    if solutions.len() < 2 {
        return invalid("need at least two solutions");
    }
    let first = &solutions[0];
    if solutions.iter().any(|s| {
        s.grid != first.grid
            || s.seed != first.seed
            || s.first_stream != first.first_stream
            || s.n_paths() != first.n_paths()
    }) {
        return invalid("solutions must share grid and noise");
    }
    let k = first.grid.index(t)?;
    let cols: Vec<Vec<f64>> = solutions.iter().map(|s| s.column(k)).collect();
    let m = cols.len();
    let mut distances = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in (a + 1)..m {
            let sq: Vec<f64> = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(x, y)| (x - y) * (x - y))
                .collect();
            let dist = crate::stats::mean(&sq).sqrt();
            distances[a][b] = dist;
            distances[b][a] = dist;
        }
    }
    Ok(CauchyReport {
        t: first.grid.time(k),
        levels: solutions.iter().map(|s| s.level).collect(),
        tail: distances[m - 2][m - 1],
        distances,
    })
}

/// Monte Carlo estimate of `E exp(δ0 sup_t |X_t|²)` with an instability flag.
pub fn non_explosion_check(solution: &SolutionGrid, delta0: f64) -> MomentCheck {
    let logs: Vec<f64> = solution
        .values
        .iter()
        .map(|p| delta0 * p.iter().fold(0.0f64, |m, x| m.max(x * x)))
        .collect();
    exponential_moment(&logs)
}

/// Constants of the small-time and pasting arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallTimeConstants {
    pub k1: f64,
    pub d: usize,
    pub sigma_norm_sq: f64,
    pub horizon: f64,
    /// `48 T max_i d σ_i² / (Σ σ_j²)²`
    pub c_a1: f64,
    /// `1 / (4 √3 d k1²)`
    pub t1: f64,
    /// `4 e^{8 k1²}`
    pub c2: f64,
    /// `0.5 min(1 / (12 d C2 |σ|²), 1 / C2)`
    pub delta0: f64,
    /// `δ0 / (64 d √2 k1²)`
    pub tau: f64,
}

pub fn small_time_constants(
    k1: f64,
    d: usize,
    sigma: &[f64],
    horizon: f64,
) -> Result<SmallTimeConstants> {
    if !(k1 > 0.0) {
        return invalid("growth constant k1 must be positive");
    }
    if d == 0 || sigma.len() != d {
        return invalid("σ must have d ≥ 1 components");
    }
    let s2: f64 = sigma.iter().map(|s| s * s).sum();
    if !(s2 > 0.0) {
        return invalid("|σ|² must be positive");
    }
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let df = d as f64;
    let max_term = sigma.iter().map(|s| df * s * s).fold(0.0, f64::max);
    let c_a1 = 48.0 * horizon * max_term / (s2 * s2);
    let t1 = 1.0 / (4.0 * 3f64.sqrt() * df * k1 * k1);
    let c2 = 4.0 * (8.0 * k1 * k1).exp();
    let delta0 = 0.5 * (1.0 / (12.0 * df * c2 * s2)).min(1.0 / c2);
    let tau = delta0 / (64.0 * df * 2f64.sqrt() * k1 * k1);
    Ok(SmallTimeConstants {
        k1,
        d,
        sigma_norm_sq: s2,
        horizon,
        c_a1,
        t1,
        c2,
        delta0,
        tau,
    })
}

impl SmallTimeConstants {
    pub fn delta0_admissible(&self, delta0: f64) -> bool {
        let df = self.d as f64;
        delta0 > 0.0
            && delta0 < (1.0 / (12.0 * df * self.c2 * self.sigma_norm_sq)).min(1.0 / self.c2)
    }
}

/// Pathwise Gronwall bound on `sup_t |X_t|²` over a horizon of length at most one:
/// `(4 x0² + 8 k1² + 4 |σ|² sup_t |σ̂ · B_t|² + 4 M2²) e^{8 k1²}`, where
/// `σ̂ = σ / |σ|` so that `|σ|² |σ̂ · B|² = |σ · B|²`.
pub fn gronwall_bound(problem: &SdeProblem, path: &BrownianPath, m2: f64) -> f64 {
    let k1 = problem.drift1.growth();
    let sup_noise = path
        .project(&problem.sigma)
        .iter()
        .fold(0.0f64, |m, v| m.max(v * v));
    (4.0 * problem.x0 * problem.x0 + 8.0 * k1 * k1 + 4.0 * sup_noise + 4.0 * m2 * m2)
        * (8.0 * k1 * k1).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongOrderReport {
    pub dts: Vec<f64>,
    /// Terminal `(E |X^dt_T - X_T|²)^{1/2}` for each step size.
    pub rmse: Vec<f64>,
    /// `rmse[m] / rmse[m + 1]`
    pub ratios: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

/// Terminal RMSE of the scheme for `dX = a X dt + σ dB` against the exact
/// transition on shared noise, for the grids `fine.coarsen(f)` with `f` in
/// `factors`.
///
/// The exact transition over a fine step `h` needs `∫ e^{a(h - u)} dB_u`,
/// which is Gaussian and correlated with the Brownian increment; the second
/// noise component supplies its independent part.
pub fn ou_strong_order(
    a: f64,
    sigma: f64,
    x0: f64,
    fine: TimeGrid,
    factors: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<StrongOrderReport> {
    if a == 0.0 {
        return invalid("the OU coefficient must be non-zero");
    }
    if factors.is_empty() {
        return invalid("no step sizes requested");
    }
    let noise = BrownianEnsemble::new(fine, 2, seed, n_paths)?;
    let problem = SdeProblem::new(
        crate::drift::catalog::linear(a),
        Arc::new(crate::drift::ZeroRandom),
        vec![sigma, 0.0],
        x0,
        fine,
    )?;
    let h = fine.dt();
    let var_i = ((2.0 * a * h).exp() - 1.0) / (2.0 * a);
    let cov = ((a * h).exp() - 1.0) / a;
    let (c, resid) = (cov / h, (var_i - cov * cov / h).max(0.0).sqrt());
    let grids = factors
        .iter()
        .map(|&f| fine.coarsen(f))
        .collect::<Result<Vec<_>>>()?;
    let errors = noise.try_map(|idx, path| {
        let mut exact = x0;
        for k in 0..fine.n_steps() {
            let z = path.increment(k, 1) / h.sqrt();
            exact = (a * h).exp() * exact + sigma * (c * path.increment(k, 0) + resid * z);
        }
        factors
            .iter()
            .zip(&grids)
            .map(|(&f, grid)| {
                let x = problem
                    .with_grid(*grid)
                    .solve_path(&path.coarsen(f)?, idx)?;
                Ok((x[x.len() - 1] - exact).powi(2))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rmse: Vec<f64> = (0..factors.len())
        .map(|m| {
            Estimate::from_samples(&errors.iter().map(|e| e[m]).collect::<Vec<_>>())
                .mean
                .sqrt()
        })
        .collect();
    Ok(StrongOrderReport {
        dts: grids.iter().map(|g| g.dt()).collect(),
        ratios: rmse.windows(2).map(|w| w[0] / w[1]).collect(),
        rmse,
        n_paths,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{catalog, ZeroRandom};
    use crate::paths::{sample_brownian, shift_path, CameronMartinShift, StreamId};

    fn zero2() -> Arc<dyn RandomDrift> {
        Arc::new(ZeroRandom)
    }

    #[test]
    fn zero_sigma_is_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(SdeProblem::new(catalog::zero(), zero2(), vec![0.0, 0.0], 0.0, grid).is_err());
        assert!(SdeProblem::new(catalog::zero(), zero2(), vec![], 0.0, grid).is_err());
    }

    #[test]
    fn pure_noise_is_exact() {
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let p = SdeProblem::new(catalog::zero(), zero2(), vec![0.5, 2.0], 1.5, grid).unwrap();
        let path = sample_brownian(grid, 2, StreamId::new(1, 1)).unwrap();
        let x = p.solve_path(&path, 0).unwrap();
        let proj = path.project(&p.sigma);
        for k in 0..=100 {
            assert!((x[k] - 1.5 - proj[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_drift_is_affine() {
        let grid = TimeGrid::new(0.0, 2.0, 64).unwrap();
        let p = SdeProblem::new(catalog::constant(0.7), zero2(), vec![1.0], -1.0, grid).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(2, 0)).unwrap();
        let x = p.solve_path(&path, 0).unwrap();
        assert!((x[64] - (-1.0 + 0.7 * 2.0 + path.value(64, 0))).abs() < 1e-12);
    }

    #[test]
    fn affine_drift_matches_discrete_recursion() {
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let (a, c) = (-0.8, 0.3);
        let b1 = DeterministicDrift::new("affine", 1.0, move |_, x| a * x + c)
            .with_derivative(move |_, _| a);
        let p = SdeProblem::new(b1, zero2(), vec![1.0], 2.0, grid).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(2, 9)).unwrap();
        let x = p.solve_path(&path, 0).unwrap();
        let dt = grid.dt();
        let mut y = 2.0;
        for k in 0..50 {
            y = (1.0 + a * dt) * y + c * dt + path.increment(k, 0);
            assert!((x[k + 1] - y).abs() < 1e-12);
        }
    }

    #[test]
    fn explosion_is_reported_not_silent() {
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let b1 = DeterministicDrift::new("blowup", 1e9, |_, x: f64| 1e9 * (1.0 + x.abs()));
        let p = SdeProblem::new(b1, zero2(), vec![1.0], 1.0, grid).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(0, 0)).unwrap();
        assert!(matches!(
            p.solve_path(&path, 3),
            Err(Error::ExplosionDetected { path: 3, .. })
        ));
    }

    #[test]
    fn shift_equivariance() {
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let sigma = vec![0.7];
        let shift = CameronMartinShift::from_fn(grid, 1, |t, _| (3.0 * t).cos());
        let path = sample_brownian(grid, 1, StreamId::new(4, 2)).unwrap();
        let shifted = shift_path(&path, &shift).unwrap();
        let b2: Arc<dyn RandomDrift> = Arc::new(catalog::tanh_shifted_noise());

        let p = SdeProblem::new(catalog::sine(0.5), b2.clone(), sigma.clone(), 0.2, grid).unwrap();
        let lhs = p.solve_path(&shifted, 0).unwrap();

        // unshifted noise, drift augmented by σ φ̇, b2 read off the shifted path
        let dt = grid.dt();
        let aug = DeterministicDrift::new("aug", 1.0, move |t, x: f64| {
            let k = (t / dt).round() as usize;
            0.5 * x.sin() + 0.7 * (3.0 * grid.time(k)).cos()
        });
        let q = SdeProblem::new(aug, b2.clone(), sigma, 0.2, grid).unwrap();
        let realized = b2.realize(&shifted);
        let rhs = q.solve_from(&path, realized.as_ref(), 0, 0.2, 0).unwrap();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_drift_levels_are_identical() {
        let grid = TimeGrid::new(0.0, 0.25, 50).unwrap();
        let ens = BrownianEnsemble::new(grid, 1, 1, 32).unwrap();
        let fam = MollifiedFamily::new(catalog::zero());
        let sols =
            solve_mollified_sequence(&fam, zero2(), &[1.0], 0.0, &ens, &[10, 100, 1000]).unwrap();
        let rep = cauchy_l2_diagnostic(&sols, 0.25).unwrap();
        assert!(rep.distances.iter().flatten().all(|&d| d == 0.0));
    }

    #[test]
    fn levels_must_increase() {
        let grid = TimeGrid::new(0.0, 0.25, 5).unwrap();
        let ens = BrownianEnsemble::new(grid, 1, 1, 2).unwrap();
        let fam = MollifiedFamily::new(catalog::zero());
        assert!(solve_mollified_sequence(&fam, zero2(), &[1.0], 0.0, &ens, &[]).is_err());
        assert!(solve_mollified_sequence(&fam, zero2(), &[1.0], 0.0, &ens, &[10, 10]).is_err());
    }

    #[test]
    fn smooth_drift_levels_agree_with_direct_solve() {
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let ens = BrownianEnsemble::new(grid, 1, 4, 16).unwrap();
        let direct = euler_maruyama(
            &SdeProblem::new(catalog::sine(1.0), zero2(), vec![1.0], 0.0, grid).unwrap(),
            &ens,
        )
        .unwrap();
        let fam = MollifiedFamily::new(catalog::sine(1.0));
        let sols = solve_mollified_sequence(&fam, zero2(), &[1.0], 0.0, &ens, &[50, 500]).unwrap();
        // |sin ∗ ρ_ε - sin| <= ε² / 2 · E[Y²] and Lipschitz stability over T = 1
        for s in &sols {
            let eps = 1.0 / s.level.unwrap() as f64;
            for (a, b) in s.values.iter().zip(&direct.values) {
                assert!((a[100] - b[100]).abs() <= eps * eps * std::f64::consts::E);
            }
        }
    }

    #[test]
    fn constants_for_unit_problem() {
        let c = small_time_constants(1.0, 1, &[1.0], 1.0).unwrap();
        assert_eq!(c.t1, 1.0 / (4.0 * 3f64.sqrt()));
        assert!((c.t1 - 0.1443).abs() < 1e-4);
        assert_eq!(c.c2, 4.0 * 8f64.exp());
        assert_eq!(c.c_a1, 48.0);
        assert!(c.delta0_admissible(c.delta0));
        assert!(c.tau <= c.t1);
        assert!(small_time_constants(0.0, 1, &[1.0], 1.0).is_err());
        assert!(small_time_constants(1.0, 1, &[0.0], 1.0).is_err());
    }

    #[test]
    fn constants_depend_on_sigma_direction() {
        // d = 2, σ = (1, 1): max_i d σ_i² / (Σσ²)² = 2 / 4
        let c = small_time_constants(1.0, 2, &[1.0, 1.0], 0.5).unwrap();
        assert!((c.c_a1 - 48.0 * 0.5 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_explosion_flags_divergent_moment() {
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let p = SdeProblem::new(catalog::zero(), zero2(), vec![1.0], 0.0, grid).unwrap();
        let sol = euler_maruyama(&p, &BrownianEnsemble::new(grid, 1, 2, 20_000).unwrap()).unwrap();
        assert!(non_explosion_check(&sol, 10.0).unstable);
        let c = small_time_constants(1.0, 1, &[1.0], 1.0).unwrap();
        let ok = non_explosion_check(&sol, c.delta0);
        assert!(!ok.unstable && ok.estimate.is_finite());
    }

    #[test]
    fn strong_order_of_ou() {
        let fine = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let r = ou_strong_order(-1.0, 1.0, 1.0, fine, &[4, 2, 1], 2000, 9).unwrap();
        assert_eq!(r.dts.len(), 3);
        assert!(r.ratios.iter().all(|q| (1.6..2.4).contains(q)), "{r:?}");
        assert!(ou_strong_order(0.0, 1.0, 1.0, fine, &[1], 10, 9).is_err());
    }
}
