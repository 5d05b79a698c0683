//! Experiment configuration, parsed strictly from TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use roughdrift::drift::{catalog, mollify, DeterministicDrift, RandomDrift};
use roughdrift::sde::SdeProblem;
use roughdrift::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub diagnostic: DiagnosticConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Catalog key of the deterministic drift.
    pub drift1: String,
    /// Catalog key of the random drift.
    pub drift2: String,
    pub sigma: Vec<f64>,
    pub x0: f64,
    pub t0: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Mollification level applied to `drift1`.
    pub mollification: Option<u32>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            drift1: "zero".into(),
            drift2: "zero".into(),
            sigma: vec![1.0],
            x0: 0.0,
            t0: 0.0,
            horizon: 1.0,
            steps: 1000,
            mollification: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Number of paths; each subcommand has its own default.
    pub paths: Option<usize>,
    pub seed: u64,
    /// Size of the worker pool; the machine's core count when absent.
    pub workers: Option<usize>,
}

/// Parameters of the individual diagnostics. Each subcommand reads the
/// fields it needs and ignores the rest.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticConfig {
    pub times: Option<Vec<f64>>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub xs: Option<Vec<f64>>,
    pub levels: Option<Vec<u32>>,
    pub eps: Option<f64>,
    pub p: Option<f64>,
    pub k: Option<f64>,
    pub k1: Option<f64>,
    pub delta0: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub depth: Option<usize>,
    pub samples: Option<usize>,
    pub moments: Option<Vec<u32>>,
    pub h: Option<Vec<f64>>,
    pub weight: Option<String>,
    pub integrand: Option<String>,
    pub mode: Option<String>,
    pub direction: Option<usize>,
    pub tolerance: Option<f64>,
    pub expected_slope: Option<f64>,
    pub strong_order: Option<bool>,
    pub x_gaps: Option<Vec<f64>>,
    pub s_gaps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        let p = &self.problem;
        Ok(TimeGrid::new(p.t0, p.horizon, p.steps)?)
    }

    /// `drift1` as named in the catalog, before mollification.
    pub fn base_drift1(&self) -> Result<DeterministicDrift, CliError> {
        catalog::deterministic(&self.problem.drift1).ok_or_else(|| {
            CliError::Config(format!(
                "problem.drift1: unknown catalog key '{}'",
                self.problem.drift1
            ))
        })
    }

    pub fn drift1(&self) -> Result<DeterministicDrift, CliError> {
        let base = self.base_drift1()?;
        Ok(match self.problem.mollification {
            Some(n) => mollify(&base, n),
            None => base,
        })
    }

    pub fn drift2(&self) -> Result<Arc<dyn RandomDrift>, CliError> {
        catalog::random(&self.problem.drift2).ok_or_else(|| {
            CliError::Config(format!(
                "problem.drift2: unknown catalog key '{}'",
                self.problem.drift2
            ))
        })
    }

    pub fn build_problem(&self) -> Result<SdeProblem, CliError> {
        Ok(SdeProblem::new(
            self.drift1()?,
            self.drift2()?,
            self.problem.sigma.clone(),
            self.problem.x0,
            self.grid()?,
        )?)
    }

    pub fn paths_or(&self, default: usize) -> Result<usize, CliError> {
        match self.ensemble.paths.unwrap_or(default) {
            0 => Err(CliError::Config("ensemble.paths must be at least 1".into())),
            n => Ok(n),
        }
    }
}
