//! Discretised Brownian paths on uniform grids.
//!
//! Each path is drawn from its own ChaCha stream: the base seed selects the
//! key and the path index selects the stream, so path `i` of an ensemble is
//! the same bit pattern no matter how many workers generate the ensemble or
//! in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// Uniform time grid `t0 < t0 + dt < ... < horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t0: f64,
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && horizon.is_finite()) || horizon <= t0 {
            return invalid(format!("grid horizon {horizon} must exceed start {t0}"));
        }
        if n_steps == 0 {
            return invalid("grid needs at least one step");
        }
        Ok(Self {
            t0,
            horizon,
            n_steps,
        })
    }

    /// Grid on `[t0, horizon]` whose step is as close as possible to `dt`.
    pub fn with_step(t0: f64, horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return invalid("step must be positive");
        }
        let n = ((horizon - t0) / dt).round().max(1.0) as usize;
        Self::new(t0, horizon, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    /// Index of the grid point nearest to `t`.
    pub fn index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * (self.horizon - self.t0);
        if t < self.t0 - tol || t > self.horizon + tol {
            return invalid(format!("time {t} outside [{}, {}]", self.t0, self.horizon));
        }
        let k = ((t - self.t0) / self.dt()).round() as usize;
        Ok(k.min(self.n_steps))
    }

    /// Grid with every `factor` consecutive steps merged.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return invalid(format!("cannot coarsen {} steps by {factor}", self.n_steps));
        }
        Self::new(self.t0, self.horizon, self.n_steps / factor)
    }
}

/// Identifies the random stream a path was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StreamId {
    pub seed: u64,
    pub stream: u64,
}

impl StreamId {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// A `d`-dimensional Brownian path sampled on a [`TimeGrid`].
///
/// Values are stored point-major: component `i` at grid point `k` lives at
/// `values[k * d + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    d: usize,
    values: Vec<f64>,
    id: StreamId,
}

impl BrownianPath {
    /// Builds a path from explicit values (`n_points * d` of them).
    pub fn from_values(grid: TimeGrid, d: usize, values: Vec<f64>, id: StreamId) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be at least 1");
        }
        if values.len() != grid.n_points() * d {
            return Err(Error::GridMismatch(format!(
                "{} values for {} points of dimension {d}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self {
            grid,
            d,
            values,
            id,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.d + i]
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    /// `B^i_{t_{k+1}} - B^i_{t_k}`
    pub fn increment(&self, k: usize, i: usize) -> f64 {
        self.value(k + 1, i) - self.value(k, i)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Component `i` as a vector over grid points.
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.grid.n_points())
            .map(|k| self.value(k, i))
            .collect()
    }

    /// `σ · B_t` at every grid point.
    pub fn project(&self, sigma: &[f64]) -> Vec<f64> {
        (0..self.grid.n_points())
            .map(|k| self.point(k).iter().zip(sigma).map(|(b, s)| b * s).sum())
            .collect()
    }

    /// Keeps every `factor`-th grid point.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let values = (0..grid.n_points())
            .flat_map(|k| self.point(k * factor).to_vec())
            .collect();
        Ok(Self {
            grid,
            d: self.d,
            values,
            id: self.id,
        })
    }

    /// Copy of the path with every value after grid point `k` replaced by zero.
    pub fn truncated_after(&self, k: usize) -> Self {
        let mut out = self.clone();
        for v in &mut out.values[(k + 1) * self.d..] {
            *v = 0.0;
        }
        out
    }

    /// CSV with columns `t, B1, ..., Bd`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.d {
            let _ = write!(s, ",B{}", i + 1);
        }
        s.push('\n');
        for k in 0..self.grid.n_points() {
            let _ = write!(s, "{}", self.grid.time(k));
            for v in self.point(k) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Draws a Brownian path started at the origin.
pub fn sample_brownian(grid: TimeGrid, d: usize, id: StreamId) -> Result<BrownianPath> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    let mut rng = id.rng();
    let sd = grid.dt().sqrt();
    let mut values = vec![0.0; grid.n_points() * d];
    for k in 0..grid.n_steps() {
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            values[(k + 1) * d + i] = values[k * d + i] + sd * z;
        }
    }
    Ok(BrownianPath {
        grid,
        d,
        values,
        id,
    })
}

/// A lazily generated ensemble: path `i` is drawn from stream `first_stream + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrownianEnsemble {
    pub grid: TimeGrid,
    pub d: usize,
    pub seed: u64,
    pub n_paths: usize,
    pub first_stream: u64,
}

impl BrownianEnsemble {
    pub fn new(grid: TimeGrid, d: usize, seed: u64, n_paths: usize) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be at least 1");
        }
        if n_paths == 0 {
            return invalid("ensemble needs at least one path");
        }
        Ok(Self {
            grid,
            d,
            seed,
            n_paths,
            first_stream: 0,
        })
    }

    /// The next `n_paths` streams after this ensemble, disjoint from it.
    pub fn disjoint(&self, n_paths: usize) -> Self {
        Self {
            n_paths,
            first_stream: self.first_stream + self.n_paths as u64,
            ..*self
        }
    }

    pub fn path(&self, i: usize) -> BrownianPath {
        let id = StreamId::new(self.seed, self.first_stream + i as u64);
        sample_brownian(self.grid, self.d, id).expect("ensemble validated on construction")
    }

    /// Applies `f` to every path, in parallel when enabled, preserving path order.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &BrownianPath) -> T + Sync + Send,
    {
        crate::par_map(self.n_paths, |i| f(i, &self.path(i)))
    }

    pub fn try_map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &BrownianPath) -> Result<T> + Sync + Send,
    {
        self.map(f).into_iter().collect()
    }
}

/// A path together with its time reversal `B̂_t = B_{T-t}` and the
/// increments of the Brownian motion `W̃` driving the reversal.
///
/// In its own filtration the reversed path satisfies
/// `dB̂_t = dW̃_t - B̂_t / (T - t) dt`, so
/// `ΔW̃_k = ΔB̂_k + B̂_{t_k} / (T - t_k) · dt` with the drift term taken at the
/// left endpoint. The final interval `[T - dt, T]` is left out: the drift
/// coefficient is unbounded there and its omission costs `O(√dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedPath {
    base: BrownianPath,
    hat_values: Vec<f64>,
    tilde_increments: Vec<f64>,
}

impl ReversedPath {
    pub fn base(&self) -> &BrownianPath {
        &self.base
    }

    /// `B̂^i` at reversed grid point `k`, i.e. `B^i_{T - t_k}`.
    pub fn hat(&self, k: usize, i: usize) -> f64 {
        self.hat_values[k * self.base.d + i]
    }

    pub fn hat_values(&self) -> &[f64] {
        &self.hat_values
    }

    /// `ΔW̃^i` over reversed interval `k`; defined for `k < n_steps - 1`.
    pub fn tilde_increment(&self, k: usize, i: usize) -> f64 {
        self.tilde_increments[k * self.base.d + i]
    }

    /// Number of reversed intervals carrying a `W̃` increment.
    pub fn n_tilde(&self) -> usize {
        self.tilde_increments.len() / self.base.d
    }

    /// The reversed path viewed as a path in its own right.
    pub fn as_path(&self) -> BrownianPath {
        BrownianPath {
            grid: self.base.grid,
            d: self.base.d,
            values: self.hat_values.clone(),
            id: self.base.id,
        }
    }

    /// Direct evaluation of `W̃_{t_b} - W̃_{t_a}` from `B̂` and a left-point
    /// quadrature of the drift correction, `a <= b <= n_steps - 1`.
    pub fn tilde_between(&self, a: usize, b: usize, i: usize) -> f64 {
        let grid = &self.base.grid;
        let dt = grid.dt();
        let horizon = grid.horizon();
        let correction: f64 = (a..b)
            .map(|k| self.hat(k, i) / (horizon - grid.time(k)) * dt)
            .sum();
        self.hat(b, i) - self.hat(a, i) + correction
    }
}

pub fn reverse_path(path: &BrownianPath) -> ReversedPath {
    let grid = path.grid;
    let n = grid.n_steps();
    let d = path.d;
    let hat_values: Vec<f64> = (0..=n).flat_map(|k| path.point(n - k).to_vec()).collect();
    let dt = grid.dt();
    let horizon = grid.horizon();
    let mut tilde_increments = Vec::with_capacity(n.saturating_sub(1) * d);
    for k in 0..n.saturating_sub(1) {
        let remaining = horizon - grid.time(k);
        for i in 0..d {
            let hat_k = hat_values[k * d + i];
            let d_hat = hat_values[(k + 1) * d + i] - hat_k;
            tilde_increments.push(d_hat + hat_k / remaining * dt);
        }
    }
    ReversedPath {
        base: path.clone(),
        hat_values,
        tilde_increments,
    }
}

/// A Cameron–Martin direction `φ(t) = ∫_0^t φ̇`, given by `φ̇` at the left
/// endpoint of every grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinShift {
    grid: TimeGrid,
    d: usize,
    rate: Vec<f64>,
}

impl CameronMartinShift {
    /// `rate[k * d + i]` is `φ̇^i` on interval `k`.
    pub fn new(grid: TimeGrid, d: usize, rate: Vec<f64>) -> Result<Self> {
        if rate.len() != grid.n_steps() * d {
            return Err(Error::GridMismatch(format!(
                "{} rates for {} intervals of dimension {d}",
                rate.len(),
                grid.n_steps()
            )));
        }
        if rate.iter().any(|r| !r.is_finite()) {
            return invalid("shift derivative must be finite");
        }
        Ok(Self { grid, d, rate })
    }

    pub fn from_fn(grid: TimeGrid, d: usize, f: impl Fn(f64, usize) -> f64) -> Self {
        let rate = (0..grid.n_steps())
            .flat_map(|k| (0..d).map(move |i| (k, i)))
            .map(|(k, i)| f(grid.time(k), i))
            .collect();
        Self { grid, d, rate }
    }

    /// Unit jump `ε e_i` in the path across interval `k`, the discrete image
    /// of the direction `1_{[t_k, T]} e_i` used for Malliavin derivatives.
    pub fn impulse(grid: TimeGrid, d: usize, k: usize, i: usize, eps: f64) -> Self {
        let mut rate = vec![0.0; grid.n_steps() * d];
        rate[k * d + i] = eps / grid.dt();
        Self { grid, d, rate }
    }

    pub fn negated(&self) -> Self {
        Self {
            rate: self.rate.iter().map(|r| -r).collect(),
            ..self.clone()
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.rate.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn rate(&self, k: usize, i: usize) -> f64 {
        self.rate[k * self.d + i]
    }
}

pub fn shift_path(path: &BrownianPath, shift: &CameronMartinShift) -> Result<BrownianPath> {
    if path.grid != shift.grid || path.d != shift.d {
        return Err(Error::GridMismatch("shift and path grids differ".into()));
    }
    let d = path.d;
    let dt = path.grid.dt();
    let mut out = path.clone();
    let mut phi = vec![0.0; d];
    for k in 0..path.grid.n_steps() {
        for (i, p) in phi.iter_mut().enumerate() {
            *p += shift.rate(k, i) * dt;
            out.values[(k + 1) * d + i] += *p;
        }
    }
    Ok(out)
}
