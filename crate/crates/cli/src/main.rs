//! `roughdrift`: run the numerical diagnostics from a TOML experiment file.

mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::Report;
use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Library(roughdrift::Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<roughdrift::Error> for CliError {
    fn from(e: roughdrift::Error) -> Self {
        CliError::Library(e)
    }
}

impl CliError {
    /// 2 for problems with the input, 1 for numerical failures.
    fn exit_code(&self) -> u8 {
        use roughdrift::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Library(
                E::InvalidInput(_) | E::MissingDerivative(_) | E::GridMismatch(_),
            ) => 2,
            CliError::Library(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "roughdrift",
    version,
    about = "Diagnostics for SDEs with rough and random drifts"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `ensemble.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `ensemble.paths`.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate the SDE; moments, non-explosion, Cauchy and strong order.
    Simulate,
    /// Martingale property of the weight and weak vs strong estimates.
    GirsanovCheck,
    /// Malliavin derivative on a time grid against finite differences.
    MalliavinCheck,
    /// Hölder exponent in t and uniform moments across mollification levels.
    HolderScan,
    /// Local-time routes, representation and exponential moments.
    LocaltimeCheck,
    /// Spatial derivative of the flow.
    FlowCheck,
    /// Weighted Sobolev norm of the flow.
    SobolevNorm,
    /// Compactness ratio of the Haar operator.
    CompactnessScan,
    /// Small-time and pasting constants.
    Constants,
    /// Catalog of drifts, weights and diagnostics.
    ListCatalog,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::GirsanovCheck => "girsanov-check",
            Command::MalliavinCheck => "malliavin-check",
            Command::HolderScan => "holder-scan",
            Command::LocaltimeCheck => "localtime-check",
            Command::FlowCheck => "flow-check",
            Command::SobolevNorm => "sobolev-norm",
            Command::CompactnessScan => "compactness-scan",
            Command::Constants => "constants",
            Command::ListCatalog => "list-catalog",
        }
    }
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.ensemble.paths = Some(paths);
    }
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.clone());
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), contents)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.join(name).display())))
}

fn run(command: Command, common: &Common) -> Result<bool, CliError> {
    let cfg = resolve(common)?;
    if let Some(workers) = cfg.ensemble.workers {
        if workers == 0 {
            return Err(CliError::Config(
                "ensemble.workers must be at least 1".into(),
            ));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let started = Instant::now();
    let report: Report = match command {
        Command::Simulate => commands::simulate(&cfg)?,
        Command::GirsanovCheck => commands::girsanov_check(&cfg)?,
        Command::MalliavinCheck => commands::malliavin_check(&cfg)?,
        Command::HolderScan => commands::holder_scan(&cfg)?,
        Command::LocaltimeCheck => commands::localtime_check(&cfg)?,
        Command::FlowCheck => commands::flow_check(&cfg)?,
        Command::SobolevNorm => commands::sobolev_norm(&cfg)?,
        Command::CompactnessScan => commands::compactness_scan(&cfg)?,
        Command::Constants => commands::constants(&cfg)?,
        Command::ListCatalog => {
            print!("{}", commands::catalog_text());
            return Ok(true);
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    let pass = report.pass();
    let summary = json!({
        "command": command.name(),
        "pass": pass,
        "checks": report.checks,
        "config": cfg,
        "result": report.result,
    });
    let text =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    print!("{text}");
    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        write(dir, "summary.json", &text)?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "elapsed_seconds": elapsed,
            "unix_timestamp": timestamp,
        });
        write(
            dir,
            "metadata.json",
            &(serde_json::to_string_pretty(&meta).unwrap_or_default() + "\n"),
        )?;
        for (name, csv) in &report.tables {
            write(dir, name, csv)?;
        }
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "check failed: {} (value {}, threshold {})",
            c.name, c.value, c.threshold
        );
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.unwrap_or(Command::ListCatalog);
    match run(command, &cli.common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
