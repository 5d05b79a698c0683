//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a flat `Float64Array`; the page reshapes it. The
//! plain functions below the bindings do the work and are what the tests call.

use std::sync::Arc;

use roughdrift::drift::{catalog, mollify, DeterministicDrift, RandomDrift};
use roughdrift::malliavin::{compactness_ratio, haar_wavelet, MalliavinPath};
use roughdrift::sde::SdeProblem;
use roughdrift::{BrownianEnsemble, Error, Result, TimeGrid};
use wasm_bindgen::prelude::*;

fn drift1(key: &str, level: u32) -> Result<DeterministicDrift> {
    let b1 = catalog::deterministic(key)
        .ok_or_else(|| Error::InvalidInput(format!("unknown drift '{key}'")))?;
    Ok(if level > 0 { mollify(&b1, level) } else { b1 })
}

fn drift2(key: &str) -> Result<Arc<dyn RandomDrift>> {
    catalog::random(key).ok_or_else(|| Error::InvalidInput(format!("unknown random drift '{key}'")))
}

/// Demo problems share σ = 1 and start at time zero.
#[derive(Debug, Clone)]
pub struct Setup {
    pub drift1: String,
    pub drift2: String,
    pub level: u32,
    pub x0: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl Setup {
    fn problem(&self) -> Result<SdeProblem> {
        let grid = TimeGrid::new(0.0, self.horizon, self.steps)?;
        SdeProblem::new(
            drift1(&self.drift1, self.level)?,
            drift2(&self.drift2)?,
            vec![1.0],
            self.x0,
            grid,
        )
    }
}

/// `paths` solutions, one after the other, each with `steps + 1` values.
pub fn sample_paths(setup: &Setup, paths: usize, seed: u64) -> Result<Vec<f64>> {
    let problem = setup.problem()?;
    let noise = BrownianEnsemble::new(problem.grid, 1, seed, paths)?;
    let solved = noise.try_map(|i, path| problem.solve_path(path, i))?;
    Ok(solved.concat())
}

/// Per path, the solution followed by `t -> D_t X_T` on the grid.
pub fn derivative_profiles(setup: &Setup, paths: usize, seed: u64) -> Result<Vec<f64>> {
    let problem = setup.problem()?;
    let n = problem.grid.n_steps();
    let noise = BrownianEnsemble::new(problem.grid, 1, seed, paths)?;
    let rows = noise.try_map(|i, path| {
        let mp = MalliavinPath::new(&problem, path, i)?;
        let mut row = mp.states().to_vec();
        row.extend((0..=n).map(|j| mp.derivative(j, n, 0)));
        Ok(row)
    })?;
    Ok(rows.concat())
}

/// Compactness ratios for the Haar wavelets at every level (first shift),
/// followed by those of `samples` Brownian paths.
pub fn haar_ratios(
    alpha: f64,
    beta: f64,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(1..=14).contains(&depth) {
        return Err(Error::InvalidInput("depth must lie in 1..=14".into()));
    }
    let n = 1usize << depth;
    let mut out = Vec::with_capacity(depth + samples);
    for level in 0..depth {
        out.push(compactness_ratio(
            &haar_wavelet(depth, level, 0)?,
            alpha,
            beta,
        )?);
    }
    if samples > 0 {
        let noise = BrownianEnsemble::new(TimeGrid::new(0.0, 1.0, n)?, 1, seed, samples)?;
        for k in 0..samples {
            out.push(compactness_ratio(
                &noise.path(k).component(0)[..n],
                alpha,
                beta,
            )?);
        }
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn setup(drift1: String, drift2: String, level: u32, x0: f64, horizon: f64, steps: usize) -> Setup {
    Setup {
        drift1,
        drift2,
        level,
        x0,
        horizon,
        steps,
    }
}

#[wasm_bindgen(js_name = simulatePaths)]
#[allow(clippy::too_many_arguments)]
pub fn simulate_paths(
    drift1: String,
    drift2: String,
    level: u32,
    x0: f64,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    sample_paths(
        &setup(drift1, drift2, level, x0, horizon, steps),
        paths,
        seed.into(),
    )
    .map_err(js)
}

#[wasm_bindgen(js_name = malliavinProfile)]
#[allow(clippy::too_many_arguments)]
pub fn malliavin_profile(
    drift1: String,
    drift2: String,
    level: u32,
    x0: f64,
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    derivative_profiles(
        &setup(drift1, drift2, level, x0, horizon, steps),
        paths,
        seed.into(),
    )
    .map_err(js)
}

#[wasm_bindgen(js_name = compactnessRatios)]
pub fn compactness_ratios(
    alpha: f64,
    beta: f64,
    depth: usize,
    samples: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    haar_ratios(alpha, beta, depth, samples, seed.into()).map_err(js)
}

/// Newline-separated deterministic drift keys, a blank line, then the random ones.
#[wasm_bindgen(js_name = catalogKeys)]
pub fn catalog_keys() -> String {
    format!(
        "{}\n\n{}",
        catalog::deterministic_keys().join("\n"),
        catalog::random_keys().join("\n")
    )
}
