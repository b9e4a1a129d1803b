//! Core numerics for decoding interior-design commands from EEG.

pub mod classifier;
pub mod cluster;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod signal;
pub mod spectral;
pub mod study;
