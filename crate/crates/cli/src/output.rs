//! Output directory layout: hashed CSV tables, `summary.json`, `manifest.json`, `error.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::run::RunOutput;

/// `sha256(kind ‖ 0 ‖ config text ‖ 0 ‖ seed override)` in hex.
pub fn config_hash(kind: &str, text: &str, seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    h.update([0u8]);
    if let Some(s) = seed_override {
        h.update(s.to_string().as_bytes());
    }
    hex::encode(h.finalize())
}

/// Deterministic summary: no timings, keys sorted.
pub fn summary(cfg: &ExperimentConfig, hash: &str, out: &RunOutput) -> Value {
    let mut checks = serde_json::Map::new();
    let mut all = !out.failed;
    for (name, tol) in &cfg.checks {
        let value = out.quantities.get(name).copied();
        let passed = value.is_some_and(|v| (v - tol.target).abs() <= tol.tol);
        all &= passed;
        checks.insert(name.clone(), json!({ "value": value, "target": tol.target, "tolerance": tol.tol, "passed": passed }));
    }
    json!({
        "kind": cfg.kind.name(),
        "config_hash": hash,
        "seed": cfg.plan.seed,
        "quantities": out.quantities,
        "details": out.details,
        "checks": checks,
        "passed": all,
    })
}

pub struct Written {
    pub dir: PathBuf,
    pub passed: bool,
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, hash: &str, out: &RunOutput, wall_seconds: f64, threads: usize) -> std::io::Result<Written> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, body) in &out.tables {
        fs::write(dir.join(name), format!("# config_hash={hash}\n{body}"))?;
        files.push(name.clone());
    }
    let s = summary(cfg, hash, out);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&s)? + "\n")?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "config_hash": hash,
        "kind": cfg.kind.name(),
        "seed": cfg.plan.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_seconds": wall_seconds,
        "timestamp_unix": timestamp,
        "threads": threads,
        "files": files,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(Written { dir: dir.to_path_buf(), passed: s["passed"].as_bool().unwrap_or(false) })
}

pub fn write_error(dir: &Path, record: &Value) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("error.json"), serde_json::to_string_pretty(record)? + "\n")
}
