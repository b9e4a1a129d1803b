//! Welch PSD estimation, canonical band powers and PCA projection.

mod bands;
mod pca;
mod welch;

pub use bands::{band_powers, Band, BandPowerVector, BANDS, N_BANDS};
pub use pca::{pca_fit, pca_inverse_transform, pca_transform, PcaModel};
pub use welch::{hann, welch_channels, welch_psd, PsdEstimate, WelchConfig};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("segment of {segment} samples does not fit in {available} samples")]
    SegmentTooLong { segment: usize, available: usize },
    #[error("overlap fraction must be in [0, 1), got {0}")]
    InvalidOverlap(f64),
    #[error("PSD stops at {max_freq} Hz but the band table needs {needed} Hz")]
    RangeTooShort { max_freq: f64, needed: f64 },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("requested {requested} components, at most {max} available")]
    ComponentsOutOfRange { requested: usize, max: usize },
    #[error("expected {expected} columns, found {found}")]
    FeatureMismatch { expected: usize, found: usize },
}
