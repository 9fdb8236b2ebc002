//! Configuration-driven runner for the protoclone simulator.
//!
//! Each subcommand validates the whole configuration first, then computes,
//! then writes CSV tables and one JSON [`RunRecord`] into the output
//! directory. CSV bodies depend only on the configuration and seed.

pub mod commands;
pub mod config;
pub mod output;
pub mod record;

use std::path::{Path, PathBuf};
use std::time::Instant;

use protoclone::exec::Exec;
use thiserror::Error;

pub use commands::{CommandKind, CommandOutput};
pub use config::{RunConfig, Setup};
pub use output::Table;
pub use record::RunRecord;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "PROTOCLONE_OUT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Model errors raised while resolving a config are config errors.
    pub fn model(e: protoclone::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn compute(e: protoclone::Error) -> Self {
        CliError::Compute(e.to_string())
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Compute(m) | CliError::Io(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

pub struct RunReport {
    pub record: RunRecord,
    pub output: CommandOutput,
    pub out_dir: PathBuf,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.output.failed {
            1
        } else {
            0
        }
    }
}

/// Output directory precedence: environment, then `--out`, then the config,
/// then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub fn exec_for(jobs: Option<usize>) -> Result<Exec, CliError> {
    match jobs {
        None => Ok(Exec::default()),
        Some(0) => Err(CliError::config("--jobs must be at least 1")),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            // A pool may already exist when called twice in one process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Exec::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Exec::Sequential),
    }
}

/// Loads, validates, runs and persists one subcommand.
pub fn execute(kind: CommandKind, opts: &RunOptions) -> Result<RunReport, CliError> {
    let mut config = match &opts.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::demo(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let exec = exec_for(opts.jobs)?;
    let setup = config.resolve()?;
    let plan = commands::plan(kind, &setup)?;
    let out_dir = resolve_out_dir(opts.out.as_deref(), &config);

    let started = Instant::now();
    let output = commands::run(kind, &setup, plan, exec)?;
    let elapsed = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    for table in &output.tables {
        table.write(&out_dir.join(format!("{}.csv", table.name)))?;
    }
    let record = RunRecord::new(kind, &config, &output, elapsed);
    record.write(&out_dir.join(format!("{}.json", kind.name())))?;
    Ok(RunReport { record, output, out_dir })
}
