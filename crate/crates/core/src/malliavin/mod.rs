//! Malliavin derivatives `D^i_t X_s` of the solution.
//!
//! The explicit representation is
//! `D^i_t X_s = e^{∫_t^s b'(u, X_u) du} (∫_t^s D^i_t b2(u, X_u) e^{-∫_t^u b'(r, X_r) dr} du + σ_i)`
//! with `b' = ∂_x (b1 + b2)`, evaluated with left-point sums on the solution
//! grid. The finite-difference oracle perturbs the noise instead: the path is
//! given a jump of size `±ε` in direction `e_i` across the interval starting
//! at `t`, which is the grid image of the Cameron–Martin direction
//! `1_{[t, T]} e_i`.

mod haar;
mod moments;

use std::fmt::Write as _;

use serde::Serialize;

pub use haar::{
    compactness_ratio, haar_apply, haar_forward, haar_inverse, haar_wavelet, l2_norm,
    sobolev_seminorm, HaarOperator,
};
pub use moments::{smooth_moment_check, SmoothMoment};

use crate::drift::{MollifiedFamily, PathDrift, RandomDrift};
use crate::error::{invalid, Error, Result};
use crate::paths::{shift_path, BrownianEnsemble, BrownianPath, CameronMartinShift};
use crate::sde::SdeProblem;
use crate::stats::{linear_fit, Estimate};

use std::sync::Arc;

/// One solution path with the cumulative drift derivative needed by the
/// explicit formula.
pub struct MalliavinPath<'a> {
    problem: &'a SdeProblem,
    b2: Box<dyn PathDrift + 'a>,
    states: Vec<f64>,
    /// `P_k = Σ_{m < k} b'(t_m, X_m) dt`
    prefix: Vec<f64>,
}

impl<'a> MalliavinPath<'a> {
    /// Solves the problem on `path` and prepares the derivative sums.
    pub fn new(problem: &'a SdeProblem, path: &BrownianPath, path_index: usize) -> Result<Self> {
        if path.grid() != &problem.grid || path.dim() != problem.dim() {
            return Err(Error::GridMismatch(
                "noise does not match the problem".into(),
            ));
        }
        let b2 = problem.drift2.realize(path);
        let (states, slopes) =
            problem.solve_linearized(path, b2.as_ref(), 0, problem.x0, path_index)?;
        Ok(Self::assemble(problem, b2, states, &slopes))
    }

    /// Uses an existing solution `states` of `problem` on `path`.
    pub fn from_solution(
        problem: &'a SdeProblem,
        path: &BrownianPath,
        states: Vec<f64>,
    ) -> Result<Self> {
        let grid = &problem.grid;
        if states.len() != grid.n_points() || path.grid() != grid {
            return Err(Error::GridMismatch(
                "solution does not match the problem grid".into(),
            ));
        }
        if !problem.drift1.is_smooth() {
            return Err(Error::MissingDerivative(format!(
                "b1 '{}' has no spatial derivative",
                problem.drift1.name()
            )));
        }
        let b2 = problem.drift2.realize(path);
        let slopes: Vec<f64> = (0..grid.n_steps())
            .map(|k| {
                problem
                    .drift1
                    .eval_dx(grid.time(k), states[k])
                    .unwrap_or(0.0)
                    + b2.eval_dx(k, states[k])
            })
            .collect();
        Ok(Self::assemble(problem, b2, states, &slopes))
    }

    fn assemble(
        problem: &'a SdeProblem,
        b2: Box<dyn PathDrift + 'a>,
        states: Vec<f64>,
        slopes: &[f64],
    ) -> Self {
        let dt = problem.grid.dt();
        let mut prefix = Vec::with_capacity(states.len());
        let mut acc = 0.0;
        prefix.push(acc);
        for s in slopes {
            acc += s * dt;
            prefix.push(acc);
        }
        Self {
            problem,
            b2,
            states,
            prefix,
        }
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// `∫_{t_a}^{t_b} b'(u, X_u) du` by left-point sums.
    pub fn exponent(&self, a: usize, b: usize) -> f64 {
        self.prefix[b] - self.prefix[a]
    }

    /// `D^i_{t_j} X_{t_k}`; zero for `j > k`.
    pub fn derivative(&self, j: usize, k: usize, i: usize) -> f64 {
        if j > k {
            return 0.0;
        }
        let sigma = self.problem.sigma[i];
        let mut total = sigma * (self.prefix[k] - self.prefix[j]).exp();
        if !self.problem.drift2.is_zero() {
            let dt = self.problem.grid.dt();
            for u in j..k {
                let db = self.b2.malliavin(j, u, self.states[u], i);
                if db != 0.0 {
                    total += db * (self.prefix[k] - self.prefix[u]).exp() * dt;
                }
            }
        }
        total
    }
}

/// `D^i_{t_j} X_{t_k}` by the explicit formula along the solution `states`.
pub fn malliavin_explicit(
    problem: &SdeProblem,
    path: &BrownianPath,
    states: &[f64],
    j: usize,
    k: usize,
    i: usize,
) -> Result<f64> {
    check_indices(problem, j, k, i)?;
    Ok(MalliavinPath::from_solution(problem, path, states.to_vec())?.derivative(j, k, i))
}

fn check_indices(problem: &SdeProblem, j: usize, k: usize, i: usize) -> Result<()> {
    let n = problem.grid.n_steps();
    if j > n || k > n {
        return invalid(format!(
            "time indices ({j}, {k}) outside a grid of {n} steps"
        ));
    }
    if i >= problem.dim() {
        return invalid(format!(
            "direction {i} but the noise has dimension {}",
            problem.dim()
        ));
    }
    Ok(())
}

/// Default oracle step `1e-4 (1 + |x0|)`.
pub fn default_fd_eps(x0: f64) -> f64 {
    1e-4 * (1.0 + x0.abs())
}

/// `(X_{t_k}(ω + ε h) - X_{t_k}(ω - ε h)) / 2ε` where `ε h` is a jump of size
/// `ε` in component `i` across interval `j`. `b2` is re-evaluated on each
/// shifted path.
pub fn malliavin_fd_oracle(
    problem: &SdeProblem,
    path: &BrownianPath,
    j: usize,
    k: usize,
    i: usize,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return invalid("finite-difference step must be positive");
    }
    check_indices(problem, j, k, i)?;
    if j >= problem.grid.n_steps() {
        return Ok(0.0);
    }
    let shift = CameronMartinShift::impulse(problem.grid, problem.dim(), j, i, eps);
    let up = problem.solve_path(&shift_path(path, &shift)?, 0)?;
    let down = problem.solve_path(&shift_path(path, &shift.negated())?, 0)?;
    Ok((up[k] - down[k]) / (2.0 * eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MalliavinRow {
    pub t: f64,
    pub s: f64,
    pub i: usize,
    pub mean: f64,
    pub se: f64,
}

/// `D^i_t X_s` per path on the pairs `t <= s` of a set of grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinGrid {
    pub times: Vec<f64>,
    /// `(a, b)` positions into `times` with `a <= b`.
    pub pairs: Vec<(usize, usize)>,
    pub d: usize,
    /// Per path, `pairs.len() * d` values ordered by pair then direction.
    pub values: Vec<Vec<f64>>,
}

impl MalliavinGrid {
    pub fn value(&self, path: usize, pair: usize, i: usize) -> f64 {
        self.values[path][pair * self.d + i]
    }

    pub fn rows(&self) -> Vec<MalliavinRow> {
        let mut rows = Vec::with_capacity(self.pairs.len() * self.d);
        for (p, &(a, b)) in self.pairs.iter().enumerate() {
            for i in 0..self.d {
                let col: Vec<f64> = self.values.iter().map(|v| v[p * self.d + i]).collect();
                let e = Estimate::from_samples(&col);
                rows.push(MalliavinRow {
                    t: self.times[a],
                    s: self.times[b],
                    i,
                    mean: e.mean,
                    se: e.se,
                });
            }
        }
        rows
    }

    /// Columns `t,s,i,mean,se`, with `i` counted from one.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,i,mean,se\n");
        for r in self.rows() {
            let _ = writeln!(out, "{},{},{},{},{}", r.t, r.s, r.i + 1, r.mean, r.se);
        }
        out
    }
}

pub fn malliavin_grid(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    indices: &[usize],
) -> Result<MalliavinGrid> {
    let n = problem.grid.n_steps();
    if indices.iter().any(|&k| k > n) {
        return invalid("time index outside the grid");
    }
    let mut idx = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    let pairs: Vec<(usize, usize)> = (0..idx.len())
        .flat_map(|b| (0..=b).map(move |a| (a, b)))
        .collect();
    let d = problem.dim();
    let values = noise.try_map(|p, path| {
        let mp = MalliavinPath::new(problem, path, p)?;
        Ok(pairs
            .iter()
            .flat_map(|&(a, b)| (0..d).map(move |i| (a, b, i)))
            .map(|(a, b, i)| mp.derivative(idx[a], idx[b], i))
            .collect())
    })?;
    Ok(MalliavinGrid {
        times: idx.iter().map(|&k| problem.grid.time(k)).collect(),
        pairs,
        d,
        values,
    })
}

/// Least-squares fit of `log E|D_t X_s - D_{t'} X_s|²` against `log |t - t'|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderFit {
    /// Fitted slope; `None` when fewer than two pairs have a positive mean.
    pub slope: Option<f64>,
    pub constant: Option<f64>,
    /// `(|t - t'|, E|D_t X_s - D_{t'} X_s|²)` for the pairs inside the gap window.
    pub points: Vec<(f64, f64)>,
    pub degenerate: bool,
}

/// Fits the Hölder exponent from per-path samples `samples[path][m]` of
/// `D_{times[m]} X_s`, using gaps in `[min_gap, max_gap]`.
pub fn holder_fit(samples: &[Vec<f64>], times: &[f64], min_gap: f64, max_gap: f64) -> HolderFit {
    let mut points = Vec::new();
    for a in 0..times.len() {
        for b in a + 1..times.len() {
            let gap = (times[b] - times[a]).abs();
            if gap < min_gap * (1.0 - 1e-9) || gap > max_gap * (1.0 + 1e-9) {
                continue;
            }
            let sq: Vec<f64> = samples.iter().map(|v| (v[a] - v[b]).powi(2)).collect();
            points.push((gap, Estimate::from_samples(&sq).mean));
        }
    }
    let usable: Vec<&(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).collect();
    let xs: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    match linear_fit(&xs, &ys) {
        Some((a, b)) if usable.len() >= 2 => HolderFit {
            slope: Some(b),
            constant: Some(a.exp()),
            points,
            degenerate: false,
        },
        _ => HolderFit {
            slope: None,
            constant: None,
            points,
            degenerate: true,
        },
    }
}

/// Hölder diagnostic in `t` of `D^i_t X_s` for `s = t_{s_idx}` and the grid
/// times `t_indices` (at least four distinct values below `s`). Gaps are
/// restricted to `[5 dt, (s - t0) / 4]`.
pub fn holder_diagnostic(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    s_idx: usize,
    t_indices: &[usize],
    i: usize,
) -> Result<HolderFit> {
    let mut ts: Vec<usize> = t_indices.iter().copied().filter(|&t| t < s_idx).collect();
    ts.sort_unstable();
    ts.dedup();
    if ts.len() < 4 {
        return invalid("Hölder diagnostic needs at least four distinct times below s");
    }
    check_indices(problem, ts[0], s_idx, i)?;
    let samples = noise.try_map(|p, path| {
        let mp = MalliavinPath::new(problem, path, p)?;
        Ok(ts
            .iter()
            .map(|&t| mp.derivative(t, s_idx, i))
            .collect::<Vec<f64>>())
    })?;
    let grid = &problem.grid;
    let times: Vec<f64> = ts.iter().map(|&k| grid.time(k)).collect();
    let s = grid.time(s_idx);
    Ok(holder_fit(
        &samples,
        &times,
        5.0 * grid.dt(),
        (s - grid.t0()) / 4.0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentScanRow {
    pub level: u32,
    /// `sup_t E|D^i_t X^n_s|²` over the scanned times.
    pub sup_second_moment: f64,
    pub se: f64,
    pub argmax_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentScan {
    pub s: f64,
    pub rows: Vec<MomentScanRow>,
    /// Largest over smallest row value.
    pub spread: f64,
    /// Some consecutive pair of levels grows by more than a factor two.
    pub growth_flag: bool,
}

/// `sup_t E|D^i_t X^n_s|²` for each mollification level `n` on common noise.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound_scan(
    family: &MollifiedFamily,
    drift2: Arc<dyn RandomDrift>,
    sigma: &[f64],
    x0: f64,
    noise: &BrownianEnsemble,
    levels: &[u32],
    s_idx: usize,
    t_indices: &[usize],
    i: usize,
) -> Result<MomentScan> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("levels must be non-empty and strictly increasing");
    }
    if t_indices.is_empty() {
        return invalid("no times to scan");
    }
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let problem = SdeProblem::new(
            family.level(n),
            drift2.clone(),
            sigma.to_vec(),
            x0,
            noise.grid,
        )?;
        check_indices(&problem, 0, s_idx, i)?;
        let samples = noise.try_map(|p, path| {
            let mp = MalliavinPath::new(&problem, path, p)?;
            Ok(t_indices
                .iter()
                .map(|&t| mp.derivative(t, s_idx, i).powi(2))
                .collect::<Vec<f64>>())
        })?;
        let mut best = MomentScanRow {
            level: n,
            sup_second_moment: f64::NEG_INFINITY,
            se: 0.0,
            argmax_t: f64::NAN,
        };
        for (m, &t) in t_indices.iter().enumerate() {
            let col: Vec<f64> = samples.iter().map(|v| v[m]).collect();
            let e = Estimate::from_samples(&col);
            if e.mean > best.sup_second_moment {
                best = MomentScanRow {
                    level: n,
                    sup_second_moment: e.mean,
                    se: e.se,
                    argmax_t: noise.grid.time(t),
                };
            }
        }
        rows.push(best);
    }
    let max = rows
        .iter()
        .map(|r| r.sup_second_moment)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = rows
        .iter()
        .map(|r| r.sup_second_moment)
        .fold(f64::INFINITY, f64::min);
    let growth_flag = rows
        .windows(2)
        .any(|w| w[1].sup_second_moment > 2.0 * w[0].sup_second_moment);
    Ok(MomentScan {
        s: noise.grid.time(s_idx),
        rows,
        spread: max / min,
        growth_flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{catalog, ZeroRandom};
    use crate::paths::{sample_brownian, StreamId, TimeGrid};

    fn problem(
        b1: crate::drift::DeterministicDrift,
        b2: Arc<dyn RandomDrift>,
        sigma: Vec<f64>,
        n: usize,
    ) -> SdeProblem {
        SdeProblem::new(b1, b2, sigma, 0.3, TimeGrid::new(0.0, 1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn zero_drift_gives_sigma() {
        let p = problem(catalog::zero(), Arc::new(ZeroRandom), vec![0.5, -2.0], 200);
        let path = sample_brownian(p.grid, 2, StreamId::new(1, 1)).unwrap();
        let mp = MalliavinPath::new(&p, &path, 0).unwrap();
        for (j, k) in [(0, 200), (50, 60), (199, 200), (10, 10)] {
            assert_eq!(mp.derivative(j, k, 0), 0.5);
            assert_eq!(mp.derivative(j, k, 1), -2.0);
        }
        assert_eq!(mp.derivative(61, 60, 0), 0.0);
        for (j, k) in [(0, 200), (50, 60)] {
            let fd = malliavin_fd_oracle(&p, &path, j, k, 1, 1e-4).unwrap();
            assert!((fd + 2.0).abs() < 1e-9, "{fd}");
        }
    }

    #[test]
    fn ou_closed_form() {
        let a = -0.7;
        let p = problem(catalog::linear(a), Arc::new(ZeroRandom), vec![1.3], 1000);
        let path = sample_brownian(p.grid, 1, StreamId::new(2, 0)).unwrap();
        let mp = MalliavinPath::new(&p, &path, 0).unwrap();
        for (j, k) in [(0, 1000), (300, 800)] {
            let exact = 1.3 * (a * (k - j) as f64 * 1e-3).exp();
            assert!((mp.derivative(j, k, 0) - exact).abs() < 1e-12);
            let fd = malliavin_fd_oracle(&p, &path, j, k, 0, 1e-4).unwrap();
            assert!((fd - exact).abs() < 1e-3 * exact, "{fd} vs {exact}");
        }
    }

    #[test]
    fn wiener_integral_closed_form() {
        let p = problem(
            catalog::zero(),
            Arc::new(catalog::wiener_integral(1.0)),
            vec![1.0],
            1000,
        );
        let path = sample_brownian(p.grid, 1, StreamId::new(3, 0)).unwrap();
        let mp = MalliavinPath::new(&p, &path, 0).unwrap();
        for (j, k) in [(0, 1000), (250, 750), (999, 1000)] {
            let exact = 1.0 + (k - j) as f64 * 1e-3;
            assert!((mp.derivative(j, k, 0) - exact).abs() < 1e-12);
            let fd = malliavin_fd_oracle(&p, &path, j, k, 0, 1e-4).unwrap();
            assert!((fd - exact).abs() < 2e-3, "{fd} vs {exact}");
        }
    }

    #[test]
    fn explicit_matches_oracle_for_random_drift() {
        let p = problem(
            catalog::sine(1.0),
            Arc::new(catalog::tanh_shifted_noise()),
            vec![1.0],
            1000,
        );
        for seed in 0..5 {
            let path = sample_brownian(p.grid, 1, StreamId::new(4, seed)).unwrap();
            let x = p.solve_path(&path, 0).unwrap();
            for (j, k) in [(100, 900), (0, 1000), (500, 510)] {
                let ex = malliavin_explicit(&p, &path, &x, j, k, 0).unwrap();
                let fd = malliavin_fd_oracle(&p, &path, j, k, 0, 1e-4).unwrap();
                assert!((ex - fd).abs() <= 1e-2 * fd.abs(), "{ex} vs {fd}");
            }
        }
    }

    #[test]
    fn adaptedness_of_both_routes() {
        let p = problem(
            catalog::sine(1.0),
            Arc::new(catalog::tanh_noise()),
            vec![1.0],
            100,
        );
        let path = sample_brownian(p.grid, 1, StreamId::new(5, 0)).unwrap();
        let x = p.solve_path(&path, 0).unwrap();
        assert_eq!(malliavin_explicit(&p, &path, &x, 60, 40, 0).unwrap(), 0.0);
        assert_eq!(
            malliavin_fd_oracle(&p, &path, 60, 40, 0, 1e-4).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_bad_input() {
        let p = problem(catalog::sign(1.0), Arc::new(ZeroRandom), vec![1.0], 10);
        let path = sample_brownian(p.grid, 1, StreamId::new(5, 0)).unwrap();
        assert!(matches!(
            MalliavinPath::new(&p, &path, 0),
            Err(Error::MissingDerivative(_))
        ));
        let p = problem(catalog::zero(), Arc::new(ZeroRandom), vec![1.0], 10);
        assert!(malliavin_fd_oracle(&p, &path, 1, 5, 0, 0.0).is_err());
        assert!(malliavin_fd_oracle(&p, &path, 1, 5, 1, 1e-3).is_err());
    }

    #[test]
    fn grid_rows_and_csv() {
        let p = problem(catalog::zero(), Arc::new(ZeroRandom), vec![2.0], 10);
        let ens = BrownianEnsemble::new(p.grid, 1, 0, 4).unwrap();
        let g = malliavin_grid(&p, &ens, &[10, 0, 5]).unwrap();
        assert_eq!(g.pairs.len(), 6);
        for r in g.rows() {
            assert_eq!((r.mean, r.se), (2.0, 0.0));
        }
        assert!(g.to_csv().starts_with("t,s,i,mean,se\n0,0,1,2,0\n"));
    }

    #[test]
    fn holder_zero_drift_is_degenerate() {
        let p = problem(catalog::zero(), Arc::new(ZeroRandom), vec![1.0], 200);
        let ens = BrownianEnsemble::new(p.grid, 1, 0, 10).unwrap();
        let fit = holder_diagnostic(&p, &ens, 200, &[10, 20, 30, 40, 50], 0).unwrap();
        assert!(fit.degenerate && fit.slope.is_none());
        assert!(holder_diagnostic(&p, &ens, 200, &[10, 20, 30], 0).is_err());
    }

    #[test]
    fn holder_ou_slope_two() {
        let p = problem(catalog::linear(-1.0), Arc::new(ZeroRandom), vec![1.0], 1000);
        let ens = BrownianEnsemble::new(p.grid, 1, 0, 4).unwrap();
        let fit = holder_diagnostic(&p, &ens, 1000, &[0, 10, 20, 40, 80, 160, 240], 0).unwrap();
        assert!((fit.slope.unwrap() - 2.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn moment_scan_zero_and_ou() {
        let grid = TimeGrid::new(0.0, 0.5, 50).unwrap();
        let ens = BrownianEnsemble::new(grid, 1, 0, 20).unwrap();
        let zero = MollifiedFamily::new(catalog::zero());
        let scan = moment_bound_scan(
            &zero,
            Arc::new(ZeroRandom),
            &[1.5],
            0.0,
            &ens,
            &[1, 10],
            50,
            &[0, 25, 49],
            0,
        )
        .unwrap();
        for r in &scan.rows {
            assert!((r.sup_second_moment - 2.25).abs() < 1e-12);
        }
        assert!(!scan.growth_flag);
        let ou = MollifiedFamily::new(catalog::linear(-1.0));
        let scan = moment_bound_scan(
            &ou,
            Arc::new(ZeroRandom),
            &[1.0],
            0.0,
            &ens,
            &[10, 100],
            50,
            &[0, 10],
            0,
        )
        .unwrap();
        // sup over t is attained at the latest time, t = 0.1
        let exact = (-2.0f64 * 0.4).exp();
        for r in &scan.rows {
            assert!((r.sup_second_moment - exact).abs() < 1e-3, "{r:?}");
        }
        assert!(moment_bound_scan(
            &ou,
            Arc::new(ZeroRandom),
            &[1.0],
            0.0,
            &ens,
            &[10, 10],
            50,
            &[0],
            0
        )
        .is_err());
    }
}
