use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::linalg::{covariance, symmetric_eigen};

/// Principal axes of a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// n_components × features, orthonormal rows.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub explained_variance_ratio: Array1<f64>,
}

/// Eigendecomposition of the sample covariance (n − 1 denominator). Each
/// component's largest-magnitude entry is made positive.
pub fn pca_fit(data: &Array2<f64>, n_components: usize) -> Result<PcaModel, SpectralError> {
    let (n, d) = data.dim();
    if n < 2 {
        return Err(SpectralError::TooFewSamples(n));
    }
    let max = (n - 1).min(d);
    if n_components == 0 || n_components > max {
        return Err(SpectralError::ComponentsOutOfRange { requested: n_components, max });
    }
    let (mean, cov) = covariance(data, 1);
    let eig = symmetric_eigen(&cov);
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();

    let mut components = Array2::zeros((n_components, d));
    for (i, mut row) in components.axis_iter_mut(Axis(0)).enumerate() {
        let col = eig.vectors.column(i);
        let pivot = col
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, v)| v)
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        row.assign(&(&col * sign));
    }
    let explained_variance = eig.values.slice(ndarray::s![..n_components]).mapv(|v| v.max(0.0));
    let explained_variance_ratio = if total > 0.0 {
        explained_variance.mapv(|v| v / total)
    } else {
        Array1::zeros(n_components)
    };
    Ok(PcaModel { mean, components, explained_variance, explained_variance_ratio })
}

fn check_width(model: &PcaModel, width: usize, expected: usize) -> Result<(), SpectralError> {
    let _ = model;
    if width != expected {
        return Err(SpectralError::FeatureMismatch { expected, found: width });
    }
    Ok(())
}

pub fn pca_transform(model: &PcaModel, data: &Array2<f64>) -> Result<Array2<f64>, SpectralError> {
    check_width(model, data.ncols(), model.mean.len())?;
    Ok((data - &model.mean).dot(&model.components.t()))
}

pub fn pca_inverse_transform(model: &PcaModel, projected: &Array2<f64>) -> Result<Array2<f64>, SpectralError> {
    check_width(model, projected.ncols(), model.components.nrows())?;
    Ok(projected.dot(&model.components) + &model.mean)
}
