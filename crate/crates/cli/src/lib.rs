//! Command-line driver: validated TOML experiment configs run against the `chaoslab` library.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

pub use config::{parse_config, ConfigError, ExperimentConfig, Kind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration ({} error(s))", .0.len())]
    Config(Vec<ConfigError>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] chaoslab::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Machine-readable record written to stderr and `error.json`.
    pub fn record(&self) -> Value {
        let (kind, messages): (&str, Vec<String>) = match self {
            CliError::Config(errs) => ("config", errs.iter().map(|e| e.to_string()).collect()),
            CliError::Io(e) => ("io", vec![e.to_string()]),
            CliError::Core(e) => ("runtime", vec![e.to_string()]),
            CliError::Usage(m) => ("usage", vec![m.clone()]),
        };
        json!({ "error": kind, "messages": messages })
    }
}

/// Invocation after argument parsing.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub kind: Kind,
    pub config_path: PathBuf,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct Completed {
    pub dir: PathBuf,
    pub hash: String,
    pub passed: bool,
}

/// Load, validate and apply overrides; the hash covers kind, config text and seed override.
pub fn load(inv: &Invocation) -> Result<(ExperimentConfig, String), CliError> {
    let text = std::fs::read_to_string(&inv.config_path)?;
    let mut cfg = parse_config(&text, inv.kind).map_err(CliError::Config)?;
    if let Some(s) = inv.seed {
        cfg.plan.seed = s;
    }
    Ok((cfg, output::config_hash(inv.kind.name(), &text, inv.seed)))
}

pub fn output_dir(inv: &Invocation, cfg: Option<&ExperimentConfig>) -> PathBuf {
    inv.out
        .clone()
        .or_else(|| cfg.map(|c| PathBuf::from(&c.out_dir)))
        .unwrap_or_else(|| PathBuf::from("chaoslab-out"))
}

pub fn execute(inv: &Invocation) -> Result<Completed, CliError> {
    let start = Instant::now();
    let (cfg, hash) = load(inv)?;
    let out = run::run(&cfg)?;
    let dir = output_dir(inv, Some(&cfg));
    let w = output::write_outputs(&dir, &cfg, &hash, &out, start.elapsed().as_secs_f64(), rayon::current_num_threads())?;
    Ok(Completed { dir: w.dir, hash, passed: w.passed })
}

/// Write `error.json`, tagged with the config hash when the config file is readable.
pub fn report_error(dir: &Path, inv: &Invocation, err: &CliError) -> Value {
    let mut rec = err.record();
    if let Ok(text) = std::fs::read_to_string(&inv.config_path) {
        rec["config_hash"] = json!(output::config_hash(inv.kind.name(), &text, inv.seed));
    }
    let _ = output::write_error(dir, &rec);
    rec
}
