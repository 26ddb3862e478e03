use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use crate::manifest::RunManifest;

pub use lrd_core::repr::io::format_sig6 as sig6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Rounded CSV tables plus full-precision JSON sidecars.
    Csv,
    /// JSON only.
    Json,
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    manifest_sha256: &'a str,
    data: &'a T,
}

/// Writes a command's artifacts into its output directory.
pub struct Sink {
    dir: PathBuf,
    format: Format,
    hash: String,
    seed_line: String,
    written: Vec<PathBuf>,
}

impl Sink {
    /// Creates the directory and writes `manifest.json`.
    pub fn open(dir: &Path, format: Format, manifest: &RunManifest) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let hash = manifest.sha256();
        let mut sink = Self {
            dir: dir.to_path_buf(),
            format,
            hash,
            seed_line: manifest.seed_line(),
            written: Vec::new(),
        };
        let body = serde_json::json!({ "manifest_sha256": sink.hash, "manifest": manifest });
        sink.write("manifest.json", pretty(&body)?)?;
        Ok(sink)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `<name>` with the comment prologue followed by whatever
    /// `body` appends. Skipped in JSON mode.
    pub fn csv<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        if self.format == Format::Json {
            return Ok(());
        }
        let mut buf = format!("# manifest_sha256={}\n# {}\n", self.hash, self.seed_line).into_bytes();
        body(&mut buf)?;
        self.write(name, buf)
    }

    /// Writes a full-precision JSON sidecar.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let sidecar = Sidecar {
            manifest_sha256: &self.hash,
            data,
        };
        let bytes = pretty(&sidecar)?;
        self.write(name, bytes)
    }

    /// `<stem>.csv` plus a `<stem>.json` sidecar holding `data`.
    pub fn emit<T, F>(&mut self, stem: &str, data: &T, body: F) -> Result<()>
    where
        T: Serialize,
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        self.csv(&format!("{stem}.csv"), body)?;
        self.json(&format!("{stem}.json"), data)
    }

    /// [`Sink::emit`] for a plain table of already formatted cells.
    pub fn table<T: Serialize>(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>], data: &T) -> Result<()> {
        self.emit(stem, data, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
            Ok(())
        })
    }
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Reads the `data` field of a sidecar, or the whole document when it is a
/// bare value.
pub fn read_sidecar<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = if value.get("manifest_sha256").is_some() {
        value.get_mut("data").map(serde_json::Value::take).unwrap_or_default()
    } else {
        value
    };
    serde_json::from_value(inner).with_context(|| format!("decoding {}", path.display()))
}
