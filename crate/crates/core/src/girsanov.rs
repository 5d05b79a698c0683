//! Girsanov kernel `u_i = σ_i b / |σ|²`, Doléans-Dade weights and the
//! weak-solution sampler built from them.
//!
//! Under the reweighted measure `dQ = Z_T dP` with
//! `Z = ℰ(∫ u(r, x + σ · B_r, ω) dB_r)`, the pure-noise process
//! `x + σ · B` solves the SDE. On the grid, with `u` taken at left endpoints,
//! `Z` is exactly the likelihood ratio of the Euler chain against pure noise,
//! so weighted and direct Euler estimates target the same discrete law when
//! `b2` is deterministic. For an `ω`-dependent `b2` the reweighted process
//! evaluates `b2` on the reference noise and is a weak solution only.

use std::sync::Arc;

use serde::Serialize;

use crate::drift::{DeterministicDrift, PathDrift, RandomDrift};
use crate::error::{invalid, Error, Result};
use crate::paths::{BrownianEnsemble, BrownianPath};
use crate::sde::{SdeProblem, SmallTimeConstants};
use crate::stats::{exponential_moment, pairwise_sum, Estimate, MomentCheck};

/// Effective sample sizes below this fraction of `N` flag a degenerate estimate.
pub const MIN_EFFECTIVE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct GirsanovKernel {
    drift1: DeterministicDrift,
    drift2: Arc<dyn RandomDrift>,
    sigma: Vec<f64>,
    sigma_norm_sq: f64,
}

pub fn girsanov_kernel(
    drift1: DeterministicDrift,
    drift2: Arc<dyn RandomDrift>,
    sigma: &[f64],
) -> Result<GirsanovKernel> {
    let s2: f64 = sigma.iter().map(|s| s * s).sum();
    if !(s2 > 0.0) {
        return invalid("Girsanov kernel needs |σ|² > 0");
    }
    Ok(GirsanovKernel {
        drift1,
        drift2,
        sigma: sigma.to_vec(),
        sigma_norm_sq: s2,
    })
}

impl GirsanovKernel {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Components `σ_i b / |σ|²` for a drift value `b`.
    pub fn split(&self, b: f64) -> Vec<f64> {
        self.sigma
            .iter()
            .map(|s| s * b / self.sigma_norm_sq)
            .collect()
    }

    /// `σ · u`, which recovers `b`.
    pub fn reconstruct(&self, u: &[f64]) -> f64 {
        self.sigma.iter().zip(u).map(|(s, v)| s * v).sum()
    }

    fn drift_at(&self, k: usize, t: f64, x: f64, b2: &dyn PathDrift) -> f64 {
        self.drift1.eval(t, x) + b2.eval(k, x)
    }
}

/// `Z_t` on the grid, stored as `log Z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoleansWeight {
    pub log_z: Vec<f64>,
    increments: Vec<f64>,
}

impl DoleansWeight {
    pub fn z(&self, k: usize) -> f64 {
        self.log_z[k].exp()
    }

    pub fn terminal(&self) -> f64 {
        self.z(self.log_z.len() - 1)
    }

    /// `Z` accumulated as a running product of per-step factors.
    pub fn direct_product(&self) -> Vec<f64> {
        let mut z = 1.0;
        let mut out = vec![1.0];
        for inc in &self.increments {
            z *= inc.exp();
            out.push(z);
        }
        out
    }
}

/// `log Z_{k+1} = log Z_k + u(t_k, X_k) · ΔB_k - ½ |u(t_k, X_k)|² dt`, with
/// `b2` frozen on `path`.
pub fn doleans_exponential(
    kernel: &GirsanovKernel,
    path: &BrownianPath,
    state: &[f64],
    path_index: usize,
) -> Result<DoleansWeight> {
    let grid = path.grid();
    if state.len() != grid.n_points() || path.dim() != kernel.dim() {
        return Err(Error::GridMismatch(
            "state, path and kernel dimensions differ".into(),
        ));
    }
    let b2 = kernel.drift2.realize(path);
    let dt = grid.dt();
    let mut log_z = Vec::with_capacity(grid.n_points());
    let mut increments = Vec::with_capacity(grid.n_steps());
    log_z.push(0.0);
    let mut acc = 0.0;
    for (k, &x) in state[..grid.n_steps()].iter().enumerate() {
        let b = kernel.drift_at(k, grid.time(k), x, b2.as_ref());
        // u = σ b / |σ|², so u · ΔB = b (σ · ΔB) / |σ|² and |u|² = b² / |σ|²
        let proj: f64 = kernel
            .sigma
            .iter()
            .enumerate()
            .map(|(i, s)| s * path.increment(k, i))
            .sum();
        let inc = (b * proj - 0.5 * b * b * dt) / kernel.sigma_norm_sq;
        acc += inc;
        if !acc.is_finite() {
            return Err(Error::WeightOverflow {
                path: path_index,
                step: k + 1,
            });
        }
        increments.push(inc);
        log_z.push(acc);
    }
    Ok(DoleansWeight { log_z, increments })
}

/// `X_t = x0 + σ · B_t`, the reference process of the weak construction.
pub fn pure_noise_state(problem: &SdeProblem, path: &BrownianPath) -> Vec<f64> {
    path.project(&problem.sigma)
        .iter()
        .map(|v| problem.x0 + v)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub terminal: Estimate,
    /// Largest `(E[Z_t] - 1) / SE` over grid times.
    pub max_excess_in_se: f64,
    pub n_eff: f64,
}

/// Monte Carlo estimate of `E[Z_t]` along the grid for the pure-noise state.
pub fn martingale_check(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
) -> Result<MartingaleReport> {
    let kernel = girsanov_kernel(
        problem.drift1.clone(),
        problem.drift2.clone(),
        &problem.sigma,
    )?;
    let weights = noise.try_map(|i, path| {
        let x = pure_noise_state(problem, path);
        doleans_exponential(&kernel, path, &x, i)
            .map(|w| w.log_z.iter().map(|l| l.exp()).collect::<Vec<f64>>())
    })?;
    let n_points = noise.grid.n_points();
    let mut max_excess = f64::NEG_INFINITY;
    let mut terminal = None;
    for k in 1..n_points {
        let col: Vec<f64> = weights.iter().map(|w| w[k]).collect();
        let e = Estimate::from_samples(&col);
        if e.se > 0.0 {
            max_excess = max_excess.max((e.mean - 1.0) / e.se);
        }
        if k == n_points - 1 {
            terminal = Some(e);
        }
    }
    let last: Vec<f64> = weights.iter().map(|w| w[n_points - 1]).collect();
    Ok(MartingaleReport {
        terminal: terminal.expect("grid has at least one step"),
        max_excess_in_se: max_excess,
        n_eff: effective_sample_size(&last),
    })
}

/// `(Σ Z)² / Σ Z²`
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = pairwise_sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    s * s / pairwise_sum(&sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub se: f64,
    pub n_eff: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub degenerate: bool,
}

/// `Σ Z_T payoff(X) / N` with `X = x0 + σ · B`.
pub fn weak_solution_sampler<F>(
    problem: &SdeProblem,
    noise: &BrownianEnsemble,
    payoff: F,
) -> Result<WeightedEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let kernel = girsanov_kernel(
        problem.drift1.clone(),
        problem.drift2.clone(),
        &problem.sigma,
    )?;
    let pairs = noise.try_map(|i, path| {
        let x = pure_noise_state(problem, path);
        let z = doleans_exponential(&kernel, path, &x, i)?.terminal();
        Ok((z, z * payoff(&x)))
    })?;
    let weights: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weighted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let e = Estimate::from_samples(&weighted);
    let n_eff = effective_sample_size(&weights);
    Ok(WeightedEstimate {
        estimate: e.mean,
        se: e.se,
        n_eff,
        n_paths: noise.n_paths,
        seed: noise.seed,
        degenerate: !(n_eff >= MIN_EFFECTIVE_FRACTION * noise.n_paths as f64),
    })
}

/// Monte Carlo estimate of `E exp(C M2²)` with `C` the exponential-moment constant.
pub fn exponential_moment_check(
    drift2: &dyn RandomDrift,
    constants: &SmallTimeConstants,
    noise: &BrownianEnsemble,
) -> MomentCheck {
    let logs = noise.map(|_, path| {
        let m2 = drift2.realize(path).m2();
        constants.c_a1 * m2 * m2
    });
    exponential_moment(&logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{catalog, ZeroRandom};
    use crate::paths::{sample_brownian, StreamId, TimeGrid};
    use crate::sde::small_time_constants;

    fn zero2() -> Arc<dyn RandomDrift> {
        Arc::new(ZeroRandom)
    }

    #[test]
    fn kernel_reconstructs_drift() {
        let k = girsanov_kernel(catalog::zero(), zero2(), &[1.0]).unwrap();
        assert_eq!(k.split(3.0), vec![3.0]);
        let k = girsanov_kernel(catalog::zero(), zero2(), &[1.0, 1.0]).unwrap();
        assert_eq!(k.split(2.0), vec![1.0, 1.0]);
        let k = girsanov_kernel(catalog::zero(), zero2(), &[0.3, -1.2, 2.0]).unwrap();
        assert!((k.reconstruct(&k.split(-0.77)) + 0.77).abs() < 1e-14);
        assert!(girsanov_kernel(catalog::zero(), zero2(), &[0.0]).is_err());
    }

    #[test]
    fn zero_drift_has_unit_weight() {
        let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(0, 0)).unwrap();
        let k = girsanov_kernel(catalog::zero(), zero2(), &[1.0]).unwrap();
        let w = doleans_exponential(&k, &path, &[0.0; 21], 0).unwrap();
        assert!(w.log_z.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn constant_kernel_closed_form() {
        let grid = TimeGrid::new(0.0, 0.5, 50).unwrap();
        let c = 1.3;
        let k = girsanov_kernel(catalog::constant(c), zero2(), &[1.0]).unwrap();
        for s in 0..5 {
            let path = sample_brownian(grid, 1, StreamId::new(1, s)).unwrap();
            let w = doleans_exponential(&k, &path, &[0.0; 51], 0).unwrap();
            let exact = (c * path.value(50, 0) - 0.5 * c * c * 0.5).exp();
            assert!((w.terminal() - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn log_domain_matches_direct_product() {
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let problem = SdeProblem::new(
            catalog::sine(2.0),
            Arc::new(catalog::tanh_noise()),
            vec![0.8],
            0.1,
            grid,
        )
        .unwrap();
        let k = girsanov_kernel(
            problem.drift1.clone(),
            problem.drift2.clone(),
            &problem.sigma,
        )
        .unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(7, 3)).unwrap();
        let x = pure_noise_state(&problem, &path);
        let w = doleans_exponential(&k, &path, &x, 0).unwrap();
        for (a, b) in w.log_z.iter().map(|l| l.exp()).zip(w.direct_product()) {
            assert!((a - b).abs() <= 1e-10 * a);
            assert!(a > 0.0);
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(0, 0)).unwrap();
        let k = girsanov_kernel(catalog::zero(), zero2(), &[1.0]).unwrap();
        assert!(doleans_exponential(&k, &path, &[0.0; 5], 0).is_err());
    }

    #[test]
    fn bounded_drift_weights_are_martingale() {
        let grid = TimeGrid::new(0.0, 0.5, 50).unwrap();
        let problem = SdeProblem::new(
            catalog::sign(1.0),
            Arc::new(catalog::tanh_noise()),
            vec![1.0],
            0.0,
            grid,
        )
        .unwrap();
        let r = martingale_check(
            &problem,
            &BrownianEnsemble::new(grid, 1, 5, 100_000).unwrap(),
        )
        .unwrap();
        assert!(r.terminal.within(1.0, 3.0), "{r:?}");
        assert!(r.max_excess_in_se <= 3.0, "{r:?}");
    }

    #[test]
    fn unit_payoff_estimates_one() {
        let grid = TimeGrid::new(0.0, 0.5, 50).unwrap();
        let problem =
            SdeProblem::new(catalog::linear(-1.0), zero2(), vec![1.0], 1.0, grid).unwrap();
        let e = weak_solution_sampler(
            &problem,
            &BrownianEnsemble::new(grid, 1, 9, 50_000).unwrap(),
            |_| 1.0,
        )
        .unwrap();
        assert!((e.estimate - 1.0).abs() <= 3.0 * e.se, "{e:?}");
        assert!(!e.degenerate);
    }

    #[test]
    fn exponential_moment_of_deterministic_bounds() {
        let grid = TimeGrid::new(0.0, 0.1, 10).unwrap();
        let c = small_time_constants(1.0, 1, &[1.0], 0.1).unwrap();
        let ens = BrownianEnsemble::new(grid, 1, 1, 1000).unwrap();
        let zero = exponential_moment_check(&ZeroRandom, &c, &ens);
        assert_eq!(zero.estimate, 1.0);
        let tanh = exponential_moment_check(&catalog::tanh_noise(), &c, &ens);
        assert!((tanh.estimate - (c.c_a1 * 4.0).exp()).abs() < 1e-9 * tanh.estimate);
        assert!(!tanh.unstable);
    }
}
