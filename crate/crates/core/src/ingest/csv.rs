//! EEG CSV:
//!
//! ```text
//! sample_rate,256
//! channels,AF3,F7,...
//! 1.23456789e0,-4.56789012e1,...   (one row per sample, one column per channel)
//! ```
//!
//! Values are written with 9 significant digits. `save_recording` also writes
//! `<file>.sha256` holding the hex digest of the file bytes; `load_recording`
//! verifies it when present.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::IngestError;
use crate::signal::EegRecording;

pub const CHECKSUM_EXTENSION: &str = "sha256";

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(CHECKSUM_EXTENSION);
    PathBuf::from(name)
}

pub fn write_recording(rec: &EegRecording) -> String {
    let mut out = String::new();
    writeln!(out, "sample_rate,{}", rec.sample_rate()).unwrap();
    writeln!(out, "channels,{}", rec.channel_names().join(",")).unwrap();
    let data = rec.data();
    for i in 0..rec.n_samples() {
        for c in 0..rec.n_channels() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:.8e}", data[[c, i]]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_number(cell: &str, line: usize, column: usize) -> Result<f64, IngestError> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| IngestError::NonNumeric { line, column, cell: cell.to_string() })?;
    if !v.is_finite() {
        return Err(IngestError::NonFinite { line, column });
    }
    Ok(v)
}

pub fn parse_recording(text: &str) -> Result<EegRecording, IngestError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (n, first) = lines.next().unwrap_or((1, ""));
    let rate_cell = first
        .strip_prefix("sample_rate,")
        .ok_or(IngestError::MissingHeader { line: n, expected: "sample_rate" })?;
    let sample_rate = parse_number(rate_cell, n, 2)?;

    let (n, second) = lines.next().unwrap_or((2, ""));
    let names: Vec<String> = second
        .strip_prefix("channels,")
        .ok_or(IngestError::MissingHeader { line: n, expected: "channels" })?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let channels = names.len();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != channels {
            return Err(IngestError::Ragged { line: n, expected: channels, found: cells.len() });
        }
        for (c, cell) in cells.iter().enumerate() {
            columns[c].push(parse_number(cell, n, c + 1)?);
        }
    }
    let samples = columns[0].len();
    if samples == 0 {
        return Err(IngestError::NoSamples);
    }
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    let data = Array2::from_shape_vec((channels, samples), flat).expect("columns share a length");
    Ok(EegRecording::new(sample_rate, names, data)?)
}

pub fn save_recording(rec: &EegRecording, path: &Path) -> Result<(), IngestError> {
    let text = write_recording(rec);
    std::fs::write(path, &text).map_err(|e| IngestError::io(path, e))?;
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    let side = sidecar(path);
    std::fs::write(&side, format!("{digest}\n")).map_err(|e| IngestError::io(&side, e))
}

pub fn load_recording(path: &Path) -> Result<EegRecording, IngestError> {
    let bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let side = sidecar(path);
    if let Ok(expected) = std::fs::read_to_string(&side) {
        if expected.trim() != hex::encode(Sha256::digest(&bytes)) {
            return Err(IngestError::ChecksumMismatch { path: path.display().to_string() });
        }
    }
    let text = String::from_utf8_lossy(&bytes);
    parse_recording(&text)
}
