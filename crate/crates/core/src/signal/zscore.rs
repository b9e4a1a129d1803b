use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::SignalError;

/// Columns with a standard deviation at or below this map to zero.
pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl NormStats {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }
}

/// Fits per-column statistics on a samples × features matrix.
pub fn zscore_fit(data: &Array2<f64>) -> Result<NormStats, SignalError> {
    if data.nrows() < 2 {
        return Err(SignalError::TooFewSamples { needed: 2, found: data.nrows() });
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let std = data.std_axis(Axis(0), 0.0);
    Ok(NormStats { mean, std })
}

pub fn zscore_apply(stats: &NormStats, data: &Array2<f64>) -> Result<Array2<f64>, SignalError> {
    if data.ncols() != stats.n_features() {
        return Err(SignalError::FeatureMismatch { expected: stats.n_features(), found: data.ncols() });
    }
    let mut out = data.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        zscore_row(stats, row.as_slice_mut().expect("standard layout"));
    }
    Ok(out)
}

/// Normalizes a single feature vector.
pub fn zscore_vector(stats: &NormStats, features: &[f64]) -> Result<Vec<f64>, SignalError> {
    if features.len() != stats.n_features() {
        return Err(SignalError::FeatureMismatch { expected: stats.n_features(), found: features.len() });
    }
    let mut v = features.to_vec();
    zscore_row(stats, &mut v);
    Ok(v)
}

fn zscore_row(stats: &NormStats, row: &mut [f64]) {
    for ((x, m), s) in row.iter_mut().zip(stats.mean.iter()).zip(stats.std.iter()) {
        *x = if *s > ZERO_VARIANCE_EPS { (*x - m) / s } else { 0.0 };
    }
}
