//! Run manifests. Every artifact a command writes carries the manifest hash,
//! so two outputs with the same hash came from the same inputs and settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use lrd_core::{MeasurementConfig, RNG_NAME};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    /// `None` when the input could not be read.
    pub sha256: Option<String>,
}

impl InputRecord {
    /// Hashes a file, or every regular file directly inside a directory in
    /// name order.
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut hasher = Sha256::new();
        if path.is_dir() {
            let mut entries: Vec<_> = fs::read_dir(path)
                .with_context(|| format!("reading {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for entry in entries {
                let name = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
                hasher.update(name.as_bytes());
                hasher.update([0]);
                hasher.update(fs::read(&entry).with_context(|| format!("reading {}", entry.display()))?);
            }
        } else {
            hasher.update(fs::read(path).with_context(|| format!("reading {}", path.display()))?);
        }
        Ok(Self {
            path: path.display().to_string(),
            sha256: Some(hex::encode(hasher.finalize())),
        })
    }

    pub fn unreadable(path: &Path) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: None,
        }
    }

    /// A table compiled into the binary.
    pub fn bundled(name: &str, contents: &str) -> Self {
        Self {
            path: format!("bundled:{name}"),
            sha256: Some(hex::encode(Sha256::digest(contents.as_bytes()))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: MeasurementConfig,
    pub inputs: Vec<InputRecord>,
    pub rng: &'static str,
    pub seeds: BTreeMap<String, u64>,
    /// Command-specific settings such as rules or budgets.
    pub options: BTreeMap<String, String>,
    pub output_dir: String,
}

impl RunManifest {
    pub fn new(command: &str, config: MeasurementConfig, output_dir: &Path) -> Self {
        Self {
            tool: "lrd",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            rng: RNG_NAME,
            seeds: BTreeMap::new(),
            options: BTreeMap::new(),
            output_dir: output_dir.display().to_string(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn option(mut self, name: &str, value: impl ToString) -> Self {
        self.options.insert(name.to_string(), value.to_string());
        self
    }

    /// SHA-256 of the compact JSON encoding. Field order is fixed by the
    /// struct and maps are ordered, so the encoding is canonical.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// One-line summary of the seeds for CSV prologues.
    pub fn seed_line(&self) -> String {
        let mut line = format!("rng={}", self.rng);
        for (k, v) in &self.seeds {
            line.push_str(&format!(" {k}={v}"));
        }
        line
    }
}
