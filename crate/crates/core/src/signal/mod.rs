//! EEG domain types and preprocessing: band-pass filtering, ICA artifact
//! rejection, epoching and Z-score normalization.

mod epoch;
mod filter;
mod ica;
mod types;
mod zscore;

pub use epoch::{epoch_count, epoch_windows};
pub use filter::{bandpass_filter, design_bandpass, filtfilt, magnitude_response, Biquad};
pub use ica::{
    excess_kurtosis, fit_fastica, remove_artifacts_ica, IcaConfig, IcaDecomposition, IcaOutcome, IcaStatus,
    RejectionMode,
};
pub use types::{
    CommandLabel, EegRecording, Epoch, FeatureLabels, FilterSpec, SegmentLabel, SpatialFeature, DEFAULT_CHANNELS,
    DEFAULT_SAMPLE_RATE, MAX_SCORE,
};
pub use zscore::{zscore_apply, zscore_fit, zscore_vector, NormStats, ZERO_VARIANCE_EPS};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("non-finite sample at channel {channel}, index {sample}")]
    NonFinite { channel: usize, sample: usize },
    #[error("score {score} for {feature} is outside [-5, 5]")]
    ScoreOutOfRange { feature: &'static str, score: f64 },
    #[error("unknown design command `{0}`")]
    UnknownCommand(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("need at least 2 channels for ICA, got {0}")]
    TooFewChannels(usize),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("channel covariance is rank deficient")]
    RankDeficient,
    #[error("component index {0} out of range")]
    InvalidComponent(usize),
    #[error("invalid window: window {window_s} s, overlap {overlap_s} s")]
    InvalidWindow { window_s: f64, overlap_s: f64 },
    #[error("{what} of {seconds} s is not a whole number of samples at {sample_rate} Hz")]
    NonIntegralWindow { what: &'static str, seconds: f64, sample_rate: f64 },
    #[error("recording has {found} samples, shorter than one window of {needed}")]
    RecordingTooShort { needed: usize, found: usize },
    #[error("expected {expected} features, found {found}")]
    FeatureMismatch { expected: usize, found: usize },
}
