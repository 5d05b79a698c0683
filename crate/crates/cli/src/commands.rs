//! One function per subcommand. Each returns a [`Report`] with named checks,
//! a JSON result and CSV tables.

use std::fmt::Write as _;

use roughdrift::drift::{catalog, MollifiedFamily};
use roughdrift::flow::{
    flow_derivative_fd, flow_moment_bound, holder_flow_diagnostic, weighted_sobolev_samples,
    FlowPath, SobolevReport, WeightFunction, XGrid,
};
use roughdrift::girsanov::{
    doleans_exponential, girsanov_kernel, martingale_check, pure_noise_state, weak_solution_sampler,
};
use roughdrift::localtime::{
    compare_routes, localtime_exp_moment, route_comparison_csv, LocalTimeRepresentation,
    SpaceTimeIntegrand, BAND_STEPS,
};
use roughdrift::malliavin::{
    compactness_ratio, default_fd_eps, haar_wavelet, holder_diagnostic, malliavin_fd_oracle,
    malliavin_grid, moment_bound_scan, smooth_moment_check, MalliavinPath,
};
use roughdrift::sde::{
    cauchy_l2_diagnostic, euler_maruyama, non_explosion_check, ou_strong_order,
    small_time_constants, solve_mollified_sequence, SdeProblem,
};
use roughdrift::stats::Estimate;
use roughdrift::{BrownianEnsemble, TimeGrid};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub result: Map<String, Value>,
    /// `(file name, contents)`
    pub tables: Vec<(String, String)>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, value: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            value,
            threshold,
        });
    }

    fn put(&mut self, key: &str, value: impl Serialize) {
        self.result.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    fn table(&mut self, name: &str, csv: String) {
        self.tables.push((name.into(), csv));
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn ensemble(
    cfg: &ExperimentConfig,
    grid: TimeGrid,
    d: usize,
    default_paths: usize,
) -> Result<BrownianEnsemble, CliError> {
    Ok(BrownianEnsemble::new(
        grid,
        d,
        cfg.ensemble.seed,
        cfg.paths_or(default_paths)?,
    )?)
}

fn index(grid: &TimeGrid, t: f64, what: &str) -> Result<usize, CliError> {
    grid.index(t).map_err(|_| {
        CliError::Config(format!(
            "diagnostic.{what} = {t} lies outside the time grid"
        ))
    })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn z_score(a: &Estimate, b: &Estimate) -> f64 {
    let se = (a.se * a.se + b.se * b.se).sqrt();
    if se == 0.0 {
        if a.mean == b.mean {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a.mean - b.mean).abs() / se
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let noise = ensemble(cfg, problem.grid, problem.dim(), 1000)?;
    let mut r = Report::default();
    let solution = euler_maruyama(&problem, &noise)?;
    let moments = solution.moments();
    let last = moments.last().expect("grid has points");
    r.put("terminal", json!({ "t": last.t, "mean": last.mean, "se": last.se, "second_moment": last.second_moment }));
    r.put("mollification_level", solution.level);
    r.put("outside_construction", solution.outside_construction);
    let mut csv = String::from("t,mean,se,second_moment\n");
    for m in &moments {
        let _ = writeln!(csv, "{},{},{},{}", m.t, m.mean, m.se, m.second_moment);
    }
    r.table("moments.csv", csv);
    r.table("paths.csv", solution.to_csv());

    if let Some(delta0) = cfg.diagnostic.delta0 {
        let m = non_explosion_check(&solution, delta0);
        r.put("non_explosion", m);
        r.check(
            "non-explosion moment is stable",
            !m.unstable,
            m.estimate,
            f64::INFINITY,
        );
    }
    if let Some(levels) = &cfg.diagnostic.levels {
        let family = MollifiedFamily::new(cfg.base_drift1()?);
        let sols = solve_mollified_sequence(
            &family,
            problem.drift2.clone(),
            &problem.sigma,
            problem.x0,
            &noise,
            levels,
        )?;
        let report = cauchy_l2_diagnostic(&sols, problem.grid.horizon())?;
        r.put("cauchy", &report);
    }
    if cfg.diagnostic.strong_order == Some(true) {
        if cfg.problem.drift1 != "ou" || !problem.drift2.is_zero() || problem.dim() != 1 {
            return Err(CliError::Config(
                "diagnostic.strong_order needs drift1 = \"ou\", drift2 = \"zero\" and one noise"
                    .into(),
            ));
        }
        let report = ou_strong_order(
            -1.0,
            problem.sigma[0],
            problem.x0,
            problem.grid,
            &[4, 2, 1],
            noise.n_paths,
            noise.seed,
        )?;
        for (m, q) in report.ratios.iter().enumerate() {
            r.check(
                &format!("RMSE ratio {m} within 2 ± 20%"),
                (1.6..=2.4).contains(q),
                *q,
                2.0,
            );
        }
        r.put("strong_order", &report);
    }
    Ok(r)
}

pub fn girsanov_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let noise = ensemble(cfg, problem.grid, problem.dim(), 10_000)?;
    let mut r = Report::default();
    let m = martingale_check(&problem, &noise)?;
    let z = (m.terminal.mean - 1.0).abs() / m.terminal.se.max(f64::MIN_POSITIVE);
    let z = if m.terminal.mean == 1.0 { 0.0 } else { z };
    r.check("E[Z_T] = 1 within 3 SE", z <= 3.0, z, 3.0);
    r.put("martingale", m);

    let kernel = girsanov_kernel(
        problem.drift1.clone(),
        problem.drift2.clone(),
        &problem.sigma,
    )?;
    let weights = noise.try_map(|i, path| {
        Ok(doleans_exponential(&kernel, path, &pure_noise_state(&problem, path), i)?.terminal())
    })?;
    let mut csv = String::from("path_id,z_terminal\n");
    for (i, w) in weights.iter().enumerate() {
        let _ = writeln!(csv, "{i},{w}");
    }
    r.table("weights.csv", csv);

    // with a random b2 the weighted law differs from the strong one, so the
    // cross-validation only runs for deterministic drifts
    if problem.drift2.is_zero() {
        let weak = weak_solution_sampler(&problem, &noise, |x| x[x.len() - 1])?;
        let other = noise.disjoint(noise.n_paths);
        let strong = euler_maruyama(&problem, &other)?;
        let strong = Estimate::from_samples(&strong.column(problem.grid.n_steps()));
        let weak_est = Estimate {
            mean: weak.estimate,
            se: weak.se,
            n: weak.n_paths,
        };
        let zz = z_score(&weak_est, &strong);
        r.check(
            "weak and strong E[X_T] within 3 combined SE",
            zz <= 3.0 && !weak.degenerate,
            zz,
            3.0,
        );
        r.put("cross_validation", json!({ "weak": weak, "strong": strong, "combined_se": (weak.se.powi(2) + strong.se.powi(2)).sqrt() }));
    }
    Ok(r)
}

fn default_times(grid: &TimeGrid) -> Vec<f64> {
    let (a, b) = (grid.t0(), grid.horizon());
    (0..=4).map(|m| a + (b - a) * m as f64 / 4.0).collect()
}

pub fn malliavin_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let grid = problem.grid;
    let noise = ensemble(cfg, grid, problem.dim(), 100)?;
    let times = cfg
        .diagnostic
        .times
        .clone()
        .unwrap_or_else(|| default_times(&grid));
    let idx = times
        .iter()
        .map(|&t| index(&grid, t, "times"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = Report::default();
    let g = malliavin_grid(&problem, &noise, &idx)?;
    r.put("rows", g.rows());
    r.table("malliavin.csv", g.to_csv());

    let eps = cfg
        .diagnostic
        .eps
        .unwrap_or_else(|| default_fd_eps(problem.x0));
    let tol = cfg.diagnostic.tolerance.unwrap_or(1e-2);
    let sorted = idx_sorted(&idx);
    let checked = noise.n_paths.min(20);
    let mut worst = 0.0f64;
    let mut csv = String::from("path_id,t,s,i,explicit,fd,rel_err\n");
    for p in 0..checked {
        let path = noise.path(p);
        let mp = MalliavinPath::new(&problem, &path, p)?;
        // on the diagonal the explicit value is the right limit σ, which a
        // jump across interval j cannot see at step j
        for &(a, b) in g.pairs.iter().filter(|q| q.0 < q.1) {
            let (j, k) = (sorted[a], sorted[b]);
            for i in 0..problem.dim() {
                let ex = mp.derivative(j, k, i);
                let fd = malliavin_fd_oracle(&problem, &path, j, k, i, eps)?;
                let e = rel(fd, ex);
                worst = worst.max(e);
                let _ = writeln!(
                    csv,
                    "{p},{},{},{},{ex},{fd},{e}",
                    grid.time(j),
                    grid.time(k),
                    i + 1
                );
            }
        }
    }
    r.check("explicit vs finite differences", worst <= tol, worst, tol);
    r.put(
        "fd",
        json!({ "paths": checked, "eps": eps, "max_rel_err": worst }),
    );
    r.table("malliavin_fd.csv", csv);
    if problem.drift1.name() == "zero" && problem.drift2.is_zero() {
        let dev = (0..g.values.len())
            .flat_map(|p| (0..g.pairs.len()).flat_map(move |q| (0..g.d).map(move |i| (p, q, i))))
            .map(|(p, q, i)| (g.value(p, q, i) - problem.sigma[i]).abs())
            .fold(0.0f64, f64::max);
        r.check("zero drift gives D_t X_s = σ_i", dev <= 1e-12, dev, 1e-12);
    }
    Ok(r)
}

fn idx_sorted(idx: &[usize]) -> Vec<usize> {
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn holder_scan(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let grid = problem.grid;
    let noise = ensemble(cfg, grid, problem.dim(), 200)?;
    let s = index(&grid, cfg.diagnostic.s.unwrap_or(grid.horizon()), "s")?;
    let ts: Vec<usize> = match &cfg.diagnostic.times {
        Some(times) => times
            .iter()
            .map(|&t| index(&grid, t, "times"))
            .collect::<Result<_, _>>()?,
        None => [0.0, 0.01, 0.02, 0.04, 0.08, 0.16, 0.25]
            .iter()
            .map(|f| s / 2 + (f * s as f64) as usize)
            .collect(),
    };
    let i = cfg.diagnostic.direction.unwrap_or(0);
    let mut r = Report::default();
    // a rough drift without a mollification level only enters through the scan
    if problem.drift1.is_smooth() || cfg.diagnostic.levels.is_none() {
        let fit = holder_diagnostic(&problem, &noise, s, &ts, i)?;
        let mut csv = String::from("gap,second_moment\n");
        for (gap, m) in &fit.points {
            let _ = writeln!(csv, "{gap},{m}");
        }
        r.table("holder.csv", csv);
        match (fit.slope, cfg.diagnostic.expected_slope) {
            (Some(slope), Some(expected)) => {
                let tol = cfg.diagnostic.tolerance.unwrap_or(0.2);
                r.check(
                    "fitted slope matches the expected one",
                    (slope - expected).abs() <= tol,
                    slope,
                    expected,
                );
            }
            (Some(slope), None) => {
                r.check("fitted slope at least 0.35", slope >= 0.35, slope, 0.35)
            }
            (None, _) => {}
        }
        r.put("holder", &fit);
    }
    if let Some(levels) = &cfg.diagnostic.levels {
        let family = MollifiedFamily::new(cfg.base_drift1()?);
        let scan = moment_bound_scan(
            &family,
            problem.drift2.clone(),
            &problem.sigma,
            problem.x0,
            &noise,
            levels,
            s,
            &ts,
            i,
        )?;
        let mut csv = String::from("level,sup_second_moment,se,argmax_t\n");
        for row in &scan.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                row.level, row.sup_second_moment, row.se, row.argmax_t
            );
        }
        r.table("moment_scan.csv", csv);
        r.check(
            "moment spread across levels at most 2",
            scan.spread <= 2.0,
            scan.spread,
            2.0,
        );
        r.put("moment_scan", &scan);
    }
    Ok(r)
}

fn integrand(key: &str, problem: &SdeProblem) -> Result<SpaceTimeIntegrand, CliError> {
    Ok(match key {
        "zero" => SpaceTimeIntegrand::zero(),
        "constant" => SpaceTimeIntegrand::constant(1.0),
        "identity" => SpaceTimeIntegrand::identity(),
        "half-square" => SpaceTimeIntegrand::half_square(),
        "drift1" => SpaceTimeIntegrand::from_drift(&problem.drift1),
        other => {
            return Err(CliError::Config(format!(
                "diagnostic.integrand: unknown key '{other}'"
            )))
        }
    })
}

pub const INTEGRAND_KEYS: [&str; 5] = ["zero", "constant", "identity", "half-square", "drift1"];

pub fn localtime_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let grid = problem.grid;
    let mut r = Report::default();
    match cfg.diagnostic.mode.as_deref().unwrap_or("routes") {
        "routes" => {
            let noise = ensemble(cfg, grid, 1, 200)?;
            let f = integrand(
                cfg.diagnostic.integrand.as_deref().unwrap_or("half-square"),
                &problem,
            )?;
            let x = cfg.diagnostic.x.unwrap_or(problem.x0);
            let b = index(&grid, cfg.diagnostic.t.unwrap_or(grid.horizon()), "t")?;
            let rows = compare_routes(&f, x, &noise, b)?;
            let tol = cfg.diagnostic.tolerance.unwrap_or(0.05);
            let good = rows.iter().filter(|q| q.rel_err <= tol).count() as f64 / rows.len() as f64;
            let a = Estimate::from_samples(&rows.iter().map(|q| q.route_a).collect::<Vec<_>>());
            let bb = Estimate::from_samples(&rows.iter().map(|q| q.route_b).collect::<Vec<_>>());
            let z = z_score(&a, &bb);
            r.check(
                "fraction of paths within tolerance",
                good >= 0.95,
                good,
                0.95,
            );
            r.check("route means within 3 combined SE", z <= 3.0, z, 3.0);
            r.put("routes", json!({ "integrand": f.name(), "x": x, "derivative_route": a, "decomposition_route": bb, "band_steps": BAND_STEPS }));
            r.table("localtime.csv", route_comparison_csv(&rows));
        }
        "representation" => {
            let noise = ensemble(cfg, grid, problem.dim(), 10)?;
            let rep = LocalTimeRepresentation::new(&problem)?;
            let j = index(&grid, cfg.diagnostic.t.unwrap_or(grid.t0()), "t")?.max(BAND_STEPS);
            let k = index(&grid, cfg.diagnostic.s.unwrap_or(grid.horizon()), "s")?;
            let i = cfg.diagnostic.direction.unwrap_or(0);
            let rows = noise.try_map(|p, path| {
                let mp = MalliavinPath::new(&problem, path, p)?;
                let lt = rep.derivative(path, mp.states(), j, k, i)?;
                let ex = mp.derivative(j, k, i);
                Ok((lt, ex))
            })?;
            let tol = cfg.diagnostic.tolerance.unwrap_or(0.05);
            let mut csv = String::from("path_id,localtime,explicit,rel_err\n");
            let mut worst = 0.0f64;
            for (p, (lt, ex)) in rows.iter().enumerate() {
                let e = rel(*lt, *ex);
                worst = worst.max(e);
                let _ = writeln!(csv, "{p},{lt},{ex},{e}");
            }
            r.check(
                "local-time form vs explicit formula",
                worst <= tol,
                worst,
                tol,
            );
            r.put("representation", json!({ "t": grid.time(j), "s": grid.time(k), "calibration": rep.calibration, "hx_norm": rep.hx_norm, "max_rel_err": worst }));
            r.table("representation.csv", csv);
        }
        "exp-moment" => {
            let noise = ensemble(cfg, grid, 1, 1000)?;
            let f = integrand(
                cfg.diagnostic.integrand.as_deref().unwrap_or("drift1"),
                &problem,
            )?;
            let k1 = cfg.diagnostic.k1.unwrap_or_else(|| problem.drift1.growth());
            let c = small_time_constants(k1, 1, &[1.0], grid.horizon() - grid.t0())?;
            let b = index(&grid, cfg.diagnostic.t.unwrap_or(grid.horizon()), "t")?;
            let m = localtime_exp_moment(
                &f,
                cfg.diagnostic.k.unwrap_or(1.0),
                cfg.diagnostic.x.unwrap_or(problem.x0),
                b,
                &c,
                &noise,
            )?;
            r.check(
                "exponential moment is stable",
                !m.unstable && m.estimate.is_finite(),
                m.estimate,
                f64::INFINITY,
            );
            r.put("exp_moment", m);
        }
        other => {
            return Err(CliError::Config(format!(
                "diagnostic.mode: unknown local-time mode '{other}'"
            )))
        }
    }
    Ok(r)
}

pub fn flow_check(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let grid = problem.grid;
    let noise = ensemble(cfg, grid, problem.dim(), 100)?;
    let s = index(&grid, cfg.diagnostic.s.unwrap_or(grid.t0()), "s")?;
    let t = index(&grid, cfg.diagnostic.t.unwrap_or(grid.horizon()), "t")?;
    if s > t {
        return Err(CliError::Config(
            "diagnostic.s must not exceed diagnostic.t".into(),
        ));
    }
    let x = cfg.diagnostic.x.unwrap_or(problem.x0);
    let eps = cfg.diagnostic.eps.unwrap_or(1e-4 * (1.0 + x.abs()));
    let tol = cfg.diagnostic.tolerance.unwrap_or(1e-2);
    let rows = noise.try_map(|p, path| {
        let b2 = problem.drift2.realize(path);
        let ex = FlowPath::new(&problem, path, b2.as_ref(), s, x, p)?.derivative(t);
        let fd = flow_derivative_fd(&problem, path, s, x, t, eps)?;
        Ok((ex, fd))
    })?;
    let mut csv = String::from("path_id,explicit,fd,rel_err\n");
    let mut worst = 0.0f64;
    for (p, (ex, fd)) in rows.iter().enumerate() {
        let e = rel(*fd, *ex);
        worst = worst.max(e);
        let _ = writeln!(csv, "{p},{ex},{fd},{e}");
    }
    let mut r = Report::default();
    r.check(
        "explicit vs finite-difference flow derivative",
        worst <= tol,
        worst,
        tol,
    );
    r.check(
        "flow derivative is positive",
        rows.iter().all(|q| q.0 > 0.0),
        rows.iter().map(|q| q.0).fold(f64::INFINITY, f64::min),
        0.0,
    );
    r.put("flow", json!({ "s": grid.time(s), "t": grid.time(t), "x": x, "eps": eps, "max_rel_err": worst, "level": problem.drift1.level() }));
    r.table("flow.csv", csv);

    if let Some(xs) = &cfg.diagnostic.xs {
        let table = flow_moment_bound(&problem, &noise, cfg.diagnostic.p.unwrap_or(2.0), xs, s, t)?;
        let mut csv = String::from("x,mean,se\n");
        for row in &table.rows {
            let _ = writeln!(csv, "{},{},{}", row.x, row.mean, row.se);
        }
        r.table("flow_moments.csv", csv);
        let finite = table.rows.iter().all(|q| q.mean.is_finite());
        r.check(
            "flow moments are finite",
            finite,
            table.slope.unwrap_or(f64::NAN),
            f64::INFINITY,
        );
        r.put("moments", &table);
    }
    if cfg.diagnostic.x_gaps.is_some() || cfg.diagnostic.s_gaps.is_some() {
        let s_gaps = cfg
            .diagnostic
            .s_gaps
            .clone()
            .unwrap_or_default()
            .iter()
            .map(|g| (g / grid.dt()).round() as usize)
            .collect::<Vec<_>>();
        let x_gaps = cfg.diagnostic.x_gaps.clone().unwrap_or_default();
        let fit = holder_flow_diagnostic(
            &problem,
            &noise,
            cfg.diagnostic.p.unwrap_or(2.0),
            s,
            x,
            &s_gaps,
            &x_gaps,
            t,
        )?;
        r.put("holder", &fit);
    }
    Ok(r)
}

pub const WEIGHT_KEYS: [&str; 3] = ["quartic", "gaussian", "indicator"];

fn weight(key: &str) -> Result<WeightFunction, CliError> {
    Ok(match key {
        "quartic" => WeightFunction::quartic(),
        "gaussian" => WeightFunction::gaussian(1.0),
        "indicator" => WeightFunction::indicator(-1.0, 1.0),
        other => {
            return Err(CliError::Config(format!(
                "diagnostic.weight: unknown key '{other}'"
            )))
        }
    })
}

pub fn sobolev_norm(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let problem = cfg.build_problem()?;
    let noise = ensemble(cfg, problem.grid, problem.dim(), 2000)?;
    let w = weight(cfg.diagnostic.weight.as_deref().unwrap_or("quartic"))?;
    let p = cfg.diagnostic.p.unwrap_or(2.0);
    let x_grid = XGrid::default();
    let (values, points_used) = weighted_sobolev_samples(&problem, &noise, &w, p, x_grid)?;
    let full = Estimate::from_samples(&values);
    let half = Estimate::from_samples(&values[..values.len().div_ceil(2)]);
    let mut r = Report::default();
    r.check(
        "norm estimate is finite",
        full.mean.is_finite(),
        full.mean,
        f64::INFINITY,
    );
    let z = z_score(&half, &full);
    r.check(
        "first half and full ensemble within 3 combined SE",
        z <= 3.0,
        z,
        3.0,
    );
    let report = SobolevReport {
        p,
        weight_id: w.id().to_string(),
        norm_estimate: full.mean,
        se: full.se,
        x_grid,
        mollification_level: problem.drift1.level(),
        n_paths: noise.n_paths,
        points_used,
    };
    r.put("sobolev", &report);
    r.put("half_ensemble", half);
    let mut csv = String::from("path_id,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(csv, "{i},{v}");
    }
    r.table("sobolev.csv", csv);
    Ok(r)
}

pub fn compactness_scan(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let d = &cfg.diagnostic;
    let (alpha, beta, depth) = (
        d.alpha.unwrap_or(0.2),
        d.beta.unwrap_or(0.3),
        d.depth.unwrap_or(12),
    );
    if !(1..=16).contains(&depth) {
        return Err(CliError::Config(
            "diagnostic.depth must lie in 1..=16".into(),
        ));
    }
    let n = 1usize << depth;
    let mut family: Vec<(String, Vec<f64>)> = Vec::new();
    for level in 0..depth.min(7) {
        family.push((
            format!("wavelet-{level}-first"),
            haar_wavelet(depth, level, 0)?,
        ));
        family.push((
            format!("wavelet-{level}-last"),
            haar_wavelet(depth, level, (1 << level) - 1)?,
        ));
    }
    for m in [1.0, 2.0, 3.0, 4.0, 8.0] {
        family.push((
            format!("sine-{m}"),
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * m * i as f64 / n as f64).sin())
                .collect(),
        ));
    }
    let samples = d.samples.unwrap_or(100);
    let bm = BrownianEnsemble::new(
        TimeGrid::new(0.0, 1.0, n)?,
        1,
        cfg.ensemble.seed,
        samples.max(1),
    )?;
    for k in 0..samples {
        family.push((
            format!("brownian-{k}"),
            bm.path(k).component(0)[..n].to_vec(),
        ));
    }
    let mut r = Report::default();
    let ratios = family
        .iter()
        .map(|(_, f)| compactness_ratio(f, alpha, beta))
        .collect::<roughdrift::Result<Vec<f64>>>()?;
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let max = sorted[sorted.len() - 1];
    let median = 0.5 * (sorted[(sorted.len() - 1) / 2] + sorted[sorted.len() / 2]);
    r.check(
        "max ratio at most twice the median",
        max <= 2.0 * median,
        max / median,
        2.0,
    );
    r.put("compactness", json!({ "alpha": alpha, "beta": beta, "depth": depth, "functions": family.len(), "max": max, "median": median }));
    let mut csv = String::from("function,ratio\n");
    for ((name, _), q) in family.iter().zip(&ratios) {
        let _ = writeln!(csv, "{name},{q}");
    }
    r.table("compactness.csv", csv);

    if let Some(orders) = &d.moments {
        let problem = cfg.build_problem()?;
        let noise = ensemble(cfg, problem.grid, problem.dim(), 10_000)?;
        let h = d.h.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4]);
        let x = d.x.unwrap_or(problem.x0);
        let f = if problem.drift1.is_smooth() && problem.drift1.name() != "zero" {
            problem.drift1.clone()
        } else {
            catalog::bump()
        };
        let mut rows = Vec::new();
        for &order in orders {
            let m = smooth_moment_check(
                |t, z| f.eval_dx(t, z).unwrap_or(0.0),
                x,
                order,
                problem.grid.t0(),
                &h,
                &problem.sigma,
                &noise,
            )?;
            let e = m.exponent.unwrap_or(f64::NAN);
            let bound = order as f64 / 2.0 - 0.2;
            r.check(
                &format!("order {order} exponent at least n/2 - 0.2"),
                e >= bound,
                e,
                bound,
            );
            rows.push(m);
        }
        r.put(
            "moment_estimate",
            json!({ "function": f.name(), "rows": rows }),
        );
    }
    Ok(r)
}

pub fn constants(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let sigma = &cfg.problem.sigma;
    let k1 = match cfg.diagnostic.k1 {
        Some(k) => k,
        None => cfg.drift1()?.growth(),
    };
    let c = small_time_constants(k1, sigma.len(), sigma, cfg.problem.horizon - cfg.problem.t0)?;
    let mut r = Report::default();
    r.check(
        "δ0 is admissible",
        c.delta0_admissible(c.delta0),
        c.delta0,
        c.c2.recip(),
    );
    if let Some(d0) = cfg.diagnostic.delta0 {
        r.check(
            "configured δ0 is admissible",
            c.delta0_admissible(d0),
            d0,
            c.c2.recip(),
        );
    }
    r.put("constants", c);
    Ok(r)
}

pub const DIAGNOSTICS: [(&str, &str); 9] = [
    (
        "simulate",
        "Euler-Maruyama ensemble, moments, non-explosion, Cauchy and strong-order checks",
    ),
    (
        "girsanov-check",
        "martingale property of the Doléans-Dade weight, weak vs strong estimates",
    ),
    (
        "malliavin-check",
        "explicit Malliavin derivative against the finite-difference oracle",
    ),
    (
        "holder-scan",
        "Hölder exponent of t -> D_t X_s and the uniform moment scan over levels",
    ),
    (
        "localtime-check",
        "local-time routes, local-time representation, exponential moments",
    ),
    (
        "flow-check",
        "flow derivative against finite differences, moments, Hölder fits",
    ),
    (
        "sobolev-norm",
        "weighted Sobolev norm of the flow with a stability check",
    ),
    (
        "compactness-scan",
        "Haar compactness ratio and the moment estimate for smooth functions",
    ),
    ("constants", "small-time and pasting constants"),
];

pub fn catalog_text() -> String {
    let mut out = String::new();
    let _ = writeln!(out, "deterministic drifts (drift1):");
    for k in catalog::deterministic_keys() {
        let _ = writeln!(out, "  {k}");
    }
    let _ = writeln!(out, "random drifts (drift2):");
    for k in catalog::random_keys() {
        let _ = writeln!(out, "  {k}");
    }
    let _ = writeln!(out, "weights:");
    for k in WEIGHT_KEYS {
        let _ = writeln!(out, "  {k}");
    }
    let _ = writeln!(out, "local-time integrands:");
    for k in INTEGRAND_KEYS {
        let _ = writeln!(out, "  {k}");
    }
    let _ = writeln!(out, "diagnostics:");
    for (k, what) in DIAGNOSTICS {
        let _ = writeln!(out, "  {k:<18} {what}");
    }
    out
}
