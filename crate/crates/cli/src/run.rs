//! Runs a config: experiments in listed order, one CSV per table, then
//! `manifest.json` with the resolved config, content hashes and checks.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiments::{execute, Context};
use crate::report::{Check, Outcome, Status};

pub const MANIFEST: &str = "manifest.json";

/// Git-style blob hash: `sha256("blob <len>\0" || bytes)`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    /// Data rows; absent for binary files.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    /// Input files named by the config (the grid file), hashed as read.
    pub inputs: Vec<OutputEntry>,
    pub outputs: Vec<OutputEntry>,
    pub checks: Vec<Check>,
    pub status: Status,
}

/// Writes `outcome`'s tables as `<stem>_<table>.csv` under `dir`.
pub fn write_outcome(dir: &Path, stem: &str, outcome: &Outcome) -> Result<Vec<OutputEntry>> {
    let mut out = Vec::new();
    for (name, table) in &outcome.tables {
        let file = format!("{stem}_{name}.csv");
        let path = dir.join(&file);
        table.write(&path).with_context(|| format!("writing {}", path.display()))?;
        let bytes = std::fs::read(&path)?;
        out.push(OutputEntry { file, rows: Some(table.rows.len()), sha256: content_hash(&bytes) });
    }
    Ok(out)
}

/// Writes the manifest to `path`.
pub fn write_manifest(path: &Path, config: &ExperimentConfig, outputs: Vec<OutputEntry>, checks: Vec<Check>) -> Result<Manifest> {
    let config_json = serde_json::to_vec(config)?;
    let status = Status::of(&checks);
    let mut inputs = Vec::new();
    if let Some(path) = &config.grid.file {
        let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        inputs.push(OutputEntry { file: path.display().to_string(), rows: None, sha256: content_hash(&bytes) });
    }
    let manifest = Manifest {
        tool: "dyadlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        config_sha256: content_hash(&config_json),
        inputs,
        outputs,
        checks,
        status,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(manifest)
}

/// Output directory: explicit argument, else the config's, else `out`.
pub fn resolve_out_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut ctx = Context::new(config)?;
    let mut outputs = Vec::new();
    let mut checks = Vec::new();
    for (i, exp) in config.experiments.iter().enumerate() {
        let stem = format!("{:02}_{}", i + 1, exp.kind());
        let outcome = execute(exp, &mut ctx).with_context(|| format!("experiment {stem}"))?;
        outputs.extend(write_outcome(dir, &stem, &outcome)?);
        checks.extend(outcome.checks);
    }
    write_manifest(&dir.join(MANIFEST), config, outputs, checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin` with sha256 object format.
        assert_eq!(content_hash(b"hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
    }

    #[test]
    fn empty_experiment_list_writes_only_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let m = run(&cfg, dir.path()).unwrap();
        assert_eq!(m.status, Status::Ok);
        assert!(m.outputs.is_empty());
        let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(files, vec![std::ffi::OsString::from(MANIFEST)]);
    }
}
