//! Command-line experiment runner for `drivenbath`.
//!
//! ```text
//! drivenbath <experiment> [--config FILE] [--seed N] [--out DIR] [--threads N] [--set section.key=value]...
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 acceptance-check
//! failure, 3 numerical failure.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Experiment, ExperimentConfig, Table};
use output::{Outputs, RunManifest, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{experiment}: {source}")]
    Numerical {
        experiment: &'static str,
        source: drivenbath::Error,
    },
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical { .. } => 3,
        }
    }
}

pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "drivenbath", version, about = "Driven Caldeira-Leggett bath experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub experiment: Command,
    /// Configuration file (`[section]` headers, `key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `ensemble.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for ensemble work. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Override a single key, e.g. `--set thermal.temperature_K=77`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Tabulate K(t) and M(t) for the configured bath.
    Kernels,
    /// Equilibrium fluctuation-dissipation check by Monte Carlo.
    FdrCheck,
    /// Driven-bath fluctuation-dissipation check by Monte Carlo.
    DrivenFdrCheck,
    /// Integrate the GLE for one thermal realization.
    GleRun,
    /// Compare the GLE against the microscopic particle-plus-bath dynamics.
    OracleCompare,
    /// Johnson-Nyquist level and the equilibrium spectrum term.
    Nyquist,
    /// Driven-bath noise estimate for a copper wire.
    CopperEstimate,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Kernels => Experiment::Kernels,
            Command::FdrCheck => Experiment::FdrCheck,
            Command::DrivenFdrCheck => Experiment::DrivenFdrCheck,
            Command::GleRun => Experiment::GleRun,
            Command::OracleCompare => Experiment::OracleCompare,
            Command::Nyquist => Experiment::Nyquist,
            Command::CopperEstimate => Experiment::CopperEstimate,
        }
    }
}

/// Builds the validated configuration: file, then flags, then defaults.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let (mut table, base) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (config::parse_text(&text)?, base)
        }
        None => (Table::new(), PathBuf::new()),
    };
    for assignment in &cli.overrides {
        config::set(&mut table, assignment)?;
    }
    if let Some(seed) = cli.seed {
        config::set(&mut table, &format!("ensemble.seed={seed}"))?;
    }
    if let Some(out) = &cli.out {
        config::set(&mut table, &format!("output.dir={}", out.display()))?;
    }
    let explicit = table.clone();
    let mut resolved = config::resolve(table);
    let reduced = resolved.get("thermal").is_some_and(|s| s.contains_key("reduced_frequency"));
    let explicit_temperature = explicit.get("thermal").is_some_and(|s| s.contains_key("temperature_K"));
    if reduced && !explicit_temperature {
        if let Some(thermal) = resolved.get_mut("thermal") {
            thermal.remove("temperature_K");
        }
    }
    ExperimentConfig::from_table(cli.experiment.into(), resolved, &explicit, &base)
}

/// Result of a completed run: the manifest (already written) and printable
/// summary lines.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.status == Status::Fail {
            EXIT_CHECK_FAILED
        } else {
            0
        }
    }
}

/// Runs one experiment. On error every file written by the run is removed.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = load_config(cli)?;
    if cli.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    with_threads(cli.threads, || execute_config(&cfg, cli.threads))?
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(f())
}

pub fn execute_config(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut outputs = Outputs::create(&cfg.out_dir)?;
    let report = match run::run(cfg, &mut outputs) {
        Ok(report) => report,
        Err(e) => {
            outputs.discard();
            return Err(e);
        }
    };
    let status = match report.passed {
        Some(true) => Status::Pass,
        Some(false) => Status::Fail,
        None => Status::Done,
    };
    let manifest = RunManifest::finish(
        &outputs,
        cfg.experiment.name(),
        status,
        threads,
        start.elapsed().as_secs_f64(),
        cfg.echo.clone(),
        report.metrics,
    );
    match manifest {
        Ok(manifest) => Ok(Outcome {
            manifest,
            lines: report.lines,
        }),
        Err(e) => {
            outputs.discard();
            Err(e)
        }
    }
}
