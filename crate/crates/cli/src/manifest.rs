//! `run_manifest.json`: what ran, with which settings, on which inputs, and
//! what it produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use hoi_core::hashing::{file_sha256, tree_sha256};
use serde::Serialize;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_seconds: f64,
}

/// Collects inputs and outputs while a command runs.
pub struct Recorder {
    command: String,
    seed: u64,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn digest(path: &Path) -> Result<FileDigest> {
    let sha256 = if path.is_dir() {
        tree_sha256(path)
    } else {
        file_sha256(path)
    }
    .with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256,
    })
}

impl Recorder {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            seed,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Hashes everything and writes the manifest into `out_dir` through a
    /// temporary file and a rename.
    pub fn finish(self, out_dir: &Path, config: &BTreeMap<String, String>) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: config.clone(),
            inputs: self
                .inputs
                .iter()
                .map(|p| digest(p))
                .collect::<Result<_>>()?,
            outputs: self
                .outputs
                .iter()
                .map(|p| digest(p))
                .collect::<Result<_>>()?,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(MANIFEST_NAME);
        let tmp = out_dir.join(format!(".{MANIFEST_NAME}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(&manifest)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}
