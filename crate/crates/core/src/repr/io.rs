//! The LRDT binary layer-stack format, the per-layer CSV fallback and CSV
//! export of series and MI curves.
//!
//! LRDT layout, all integers little-endian:
//!
//! | bytes  | field                                  |
//! |--------|----------------------------------------|
//! | 0..4   | magic `"LRDT"`                         |
//! | 4..6   | version, `u16` = 1                     |
//! | 6      | dtype, `u8` = 0 (f32 LE)               |
//! | 7      | reserved = 0                           |
//! | 8..12  | layer_count `u32` (= L + 1)            |
//! | 12..16 | n_examples `u32`                       |
//! | 16..20 | dim `u32`                              |
//! | 20..   | layer-major, row-major f32 payload     |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{LayerSeries, RepresentationSequence};
use crate::error::{Error, Result};
use crate::gfmi::MiCurve;

pub const MAGIC: &[u8; 4] = b"LRDT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
pub const HEADER_LEN: usize = 20;

/// Parses an LRDT byte buffer.
pub fn decode_sequence(bytes: &[u8], source_id: impl Into<String>) -> Result<RepresentationSequence> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes[6] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[6]));
    }
    if bytes[7] != 0 {
        return Err(Error::InvalidSequence(format!(
            "reserved header byte is {}, expected 0",
            bytes[7]
        )));
    }
    let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let layer_count = read_u32(8);
    let n = read_u32(12);
    let d = read_u32(16);

    let expected = layer_count
        .checked_mul(n)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| Error::InvalidSequence("header dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    let found = payload.len() / 4;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if payload.len() != expected * 4 {
        return Err(Error::InvalidSequence(format!(
            "{} trailing bytes after payload",
            payload.len() - expected * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RepresentationSequence::new(layer_count, n, d, data, source_id)
}

/// Serializes a sequence to LRDT bytes.
pub fn encode_sequence(seq: &RepresentationSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + seq.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(0);
    for v in [seq.layer_count(), seq.n_examples(), seq.dim()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in seq.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Reads an LRDT file. The file stem becomes the source id.
pub fn load_sequence(path: impl AsRef<Path>) -> Result<RepresentationSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_sequence(&bytes, id)
}

/// Writes an LRDT file.
pub fn save_sequence(seq: &RepresentationSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_sequence(seq)).map_err(|e| Error::io(path, e))
}

/// Loads one headerless CSV per layer (N rows, d columns each).
pub fn load_csv_layers(paths: &[PathBuf], source_id: impl Into<String>) -> Result<RepresentationSequence> {
    if paths.is_empty() {
        return Err(Error::InvalidSequence("empty layer list".into()));
    }
    let mut layers = Vec::with_capacity(paths.len());
    let mut shape: Option<(usize, usize)> = None;
    for path in paths {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut values = Vec::new();
        let mut rows = 0;
        let mut width = None;
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            match width {
                None => width = Some(record.len()),
                Some(w) if w != record.len() => {
                    return Err(Error::Schema {
                        path: path.display().to_string(),
                        row: row + 1,
                        msg: format!("expected {w} columns, found {}", record.len()),
                    })
                }
                _ => {}
            }
            for field in record.iter() {
                let v: f32 = field.parse().map_err(|_| Error::Schema {
                    path: path.display().to_string(),
                    row: row + 1,
                    msg: format!("not a number: {field:?}"),
                })?;
                values.push(v);
            }
            rows += 1;
        }
        let this = (rows, width.unwrap_or(0));
        match shape {
            None => shape = Some(this),
            Some(s) if s != this => {
                return Err(Error::DimMismatch(format!(
                    "{} is {}x{}, previous layers are {}x{}",
                    path.display(),
                    this.0,
                    this.1,
                    s.0,
                    s.1
                )))
            }
            _ => {}
        }
        layers.push(values);
    }
    let (n, d) = shape.unwrap();
    RepresentationSequence::from_layers(layers, n, d, source_id)
}

/// Writes `layer_000.csv`, `layer_001.csv`, ... into `dir`.
pub fn save_csv_layers(seq: &RepresentationSequence, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(seq.layer_count());
    for l in 0..seq.layer_count() {
        let path = dir.join(format!("layer_{l:03}.csv"));
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
        for row in seq.layer(l).chunks_exact(seq.dim()) {
            writer.write_record(row.iter().map(|v| v.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Formats a value with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes a series as `layer_index,value,kind` rows.
pub fn write_series_csv<W: Write>(writer: W, series: &[&LayerSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["layer_index", "value", "kind"])?;
    for s in series {
        for (l, v) in s.iter() {
            w.write_record([l.to_string(), format_sig6(v), s.kind().as_str().to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<series csv>", e))?;
    Ok(())
}

/// Writes per-layer curves as `layer_index,tau,mi` rows.
pub fn write_curves_csv<W: Write>(writer: W, curves: &[MiCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["layer_index", "tau", "mi"])?;
    for (l, curve) in curves.iter().enumerate() {
        for (tau, mi) in curve.grid().iter().zip(curve.values()) {
            w.write_record([l.to_string(), format_sig6(*tau), format_sig6(*mi)])?;
        }
    }
    w.flush().map_err(|e| Error::io("<curve csv>", e))?;
    Ok(())
}
