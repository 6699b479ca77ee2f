//! Command-line experiment runner for the relaysim engines.
//!
//! A run reads one JSON config, evaluates it and writes a CSV plus a
//! `<name>.manifest.json` that reproduces the run when fed back in.

pub mod config;
pub mod experiments;
pub mod table;

use std::path::{Path, PathBuf};

use config::{BuildInfo, ConfigError, ExperimentConfig, ExperimentKind};
use thiserror::Error;

/// Exit code for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical or IO failures.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<relaysim_core::Error> for RunError {
    fn from(e: relaysim_core::Error) -> Self {
        use relaysim_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) => RunError::Config(ConfigError {
                line: None,
                message: e.to_string(),
            }),
            E::Solver(_) | E::Infeasible { .. } => RunError::Runtime(e.to_string()),
        }
    }
}

impl From<table::TableError> for RunError {
    fn from(e: table::TableError) -> Self {
        RunError::Runtime(e.to_string())
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub output: Option<PathBuf>,
}

fn plain(message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: None,
        message: message.into(),
    }
}

/// Reads, checks and completes the config for a `kind` run.
pub fn load_config(kind: ExperimentKind, path: &Path, ov: &Overrides) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| plain(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = config::parse_config(&text)?;
    if cfg.kind != kind {
        return Err(ConfigError {
            line: config::line_of_key(&text, "kind", 0),
            message: format!("config is for a {} experiment, not {kind}", cfg.kind),
        }
        .into());
    }
    cfg.validate(&text)?;
    if let Some(s) = ov.seed {
        cfg.master_seed = s;
    }
    let uses_trials = cfg.kind_uses_trials();
    if let Some(n) = ov.trials.filter(|_| uses_trials) {
        cfg.trials = Some(n);
    }
    if let Some(o) = &ov.output {
        cfg.output = Some(o.clone());
    }
    if cfg.output.is_none() {
        return Err(plain("no output path: set \"output\" or pass --out").into());
    }
    if uses_trials {
        cfg.trials = Some(cfg.trials_or_default());
    }
    cfg.build = None;
    cfg.validate(&text)?;
    Ok(cfg)
}

/// `out.csv` -> `out.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Evaluates a checked config and writes the CSV and its manifest. Nothing is
/// written unless the whole evaluation succeeds.
pub fn execute(cfg: &ExperimentConfig) -> Result<PathBuf, RunError> {
    let out = cfg.output.clone().ok_or_else(|| plain("no output path"))?;
    let table = experiments::run(cfg)?;
    let csv = table::encode_csv(&table.columns, &table.rows)?;
    let mut manifest = cfg.clone();
    manifest.build = Some(BuildInfo::current());
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Runtime(e.to_string()))?;
    let write = |p: &Path, bytes: &[u8]| {
        std::fs::write(p, bytes).map_err(|e| RunError::Runtime(format!("cannot write {}: {e}", p.display())))
    };
    write(&out, &csv)?;
    write(&manifest_path(&out), format!("{json}\n").as_bytes())?;
    Ok(out)
}

pub fn run(kind: ExperimentKind, config: &Path, ov: &Overrides) -> Result<PathBuf, RunError> {
    let cfg = load_config(kind, config, ov)?;
    execute(&cfg)
}
