//! Dataset formats, synthetic EEG and replay streaming.

mod csv;
mod dataset;
mod replay;
mod synth;

pub use csv::{load_recording, parse_recording, save_recording, write_recording, CHECKSUM_EXTENSION};
pub use dataset::{load_dataset, save_dataset, LabelKind, LabeledSegment, LabeledSegmentSet, DATASET_FILE};
pub use replay::{replay_stream, ChunkSink, ReplayConfig, ReplayHandle, ReplayOutcome, Speed, StreamEvent};
pub use synth::{synth_generate, ClassSignature, SynthSpec};

use thiserror::Error;

use crate::signal::SignalError;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: missing `{expected}` header")]
    MissingHeader { line: usize, expected: &'static str },
    #[error("line {line}: expected {expected} values, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: `{cell}` is not a number")]
    NonNumeric { line: usize, column: usize, cell: String },
    #[error("line {line}, column {column}: non-finite value")]
    NonFinite { line: usize, column: usize },
    #[error("no samples")]
    NoSamples,
    #[error("checksum mismatch for {path}")]
    ChecksumMismatch { path: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("dataset manifest: {0}")]
    Manifest(String),
    #[error("synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("replay speed must be positive, got {0}")]
    InvalidSpeed(f64),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

impl IngestError {
    fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.display().to_string(), source }
    }
}
