//! Experiment manifests: what ran, on which inputs, and what it wrote.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub toolkit_version: String,
    pub config_hash: String,
    pub dataset_path: Option<String>,
    pub dataset_hash: Option<String>,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// `ok`, or what stopped the command early.
    pub status: String,
    pub notes: Vec<String>,
    pub outputs: Vec<OutputEntry>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Collects manifest fields while a command runs.
#[derive(Clone, Debug)]
pub struct ManifestBuilder {
    manifest: Manifest,
}

impl ManifestBuilder {
    /// `config` is hashed through its canonical JSON form.
    pub fn start<C: Serialize>(command: &str, config: &C, seed: u64) -> Result<Self> {
        let config_hash = io::sha256_bytes(serde_json::to_string(config)?.as_bytes());
        Ok(ManifestBuilder {
            manifest: Manifest {
                command: command.into(),
                toolkit_version: env!("CARGO_PKG_VERSION").into(),
                config_hash,
                dataset_path: None,
                dataset_hash: None,
                seed,
                started_unix_ms: now_ms(),
                finished_unix_ms: 0,
                status: "ok".into(),
                notes: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn dataset(&mut self, path: &Path, hash: String) -> &mut Self {
        self.manifest.dataset_path = Some(path.display().to_string());
        self.manifest.dataset_hash = Some(hash);
        self
    }

    pub fn status(&mut self, status: &str) -> &mut Self {
        self.manifest.status = status.into();
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.manifest.notes.push(note.into());
        self
    }

    /// Hashes `files` (relative to `out`) and writes the manifest next to
    /// them.
    pub fn finish(mut self, out: &Path, files: &[&str]) -> Result<Manifest> {
        for f in files {
            let sha256 = io::sha256_file(&out.join(f))?;
            self.manifest.outputs.push(OutputEntry { path: (*f).into(), sha256 });
        }
        self.manifest.finished_unix_ms = now_ms();
        io::write_json(&out.join(MANIFEST_FILE), &self.manifest)?;
        Ok(self.manifest)
    }
}

/// Checks that every listed output exists with its recorded digest.
pub fn verify(out: &Path, manifest: &Manifest) -> Result<bool> {
    for o in &manifest.outputs {
        let path = out.join(&o.path);
        if !path.exists() || io::sha256_file(&path)? != o.sha256 {
            return Ok(false);
        }
    }
    Ok(true)
}
