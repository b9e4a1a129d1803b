//! FastICA (deflation, tanh contrast) artifact rejection.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EegRecording, SignalError};
use crate::linalg::symmetric_eigen;

/// How rejected components are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "components")]
pub enum RejectionMode {
    /// Reject components whose |excess kurtosis| exceeds the threshold.
    Automatic,
    /// Reject exactly these component indices.
    Manual(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcaConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub kurtosis_threshold: f64,
    pub rejection: RejectionMode,
    pub seed: u64,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-5,
            kurtosis_threshold: 5.0,
            rejection: RejectionMode::Automatic,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcaStatus {
    Converged,
    /// Some component did not converge; the input was returned unchanged.
    NotConverged { component: usize },
}

#[derive(Debug, Clone)]
pub struct IcaOutcome {
    pub recording: EegRecording,
    pub rejected: Vec<usize>,
    pub status: IcaStatus,
    /// Excess kurtosis of each estimated source.
    pub kurtosis: Vec<f64>,
}

/// Fitted decomposition: `sources = unmixing · (x − mean)` and
/// `x = mixing · sources + mean`.
#[derive(Debug, Clone)]
pub struct IcaDecomposition {
    pub mean: Array1<f64>,
    pub unmixing: Array2<f64>,
    pub mixing: Array2<f64>,
}

impl IcaDecomposition {
    pub fn sources(&self, data: &Array2<f64>) -> Array2<f64> {
        let centered = data - &self.mean.view().insert_axis(Axis(1));
        self.unmixing.dot(&centered)
    }

    /// Rebuilds channels from sources with the listed components zeroed.
    pub fn reconstruct(&self, sources: &Array2<f64>, rejected: &[usize]) -> Array2<f64> {
        let mut kept = sources.clone();
        for &c in rejected {
            kept.row_mut(c).fill(0.0);
        }
        self.mixing.dot(&kept) + &self.mean.view().insert_axis(Axis(1))
    }
}

pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 <= f64::MIN_POSITIVE {
        0.0
    } else {
        m4 / (m2 * m2) - 3.0
    }
}

/// Fits FastICA. `Err(component)` reports the first component that failed to converge.
pub fn fit_fastica(data: &Array2<f64>, cfg: &IcaConfig) -> Result<Result<IcaDecomposition, usize>, SignalError> {
    let (n_ch, n_s) = data.dim();
    let mean = data.sum_axis(Axis(1)) / n_s as f64;
    let centered = data - &mean.view().insert_axis(Axis(1));
    let cov = centered.dot(&centered.t()) / n_s as f64;
    let eig = symmetric_eigen(&cov);
    let floor = eig.values[0].abs().max(f64::MIN_POSITIVE) * 1e-12;
    if eig.values.iter().any(|&v| v <= floor) {
        return Err(SignalError::RankDeficient);
    }
    let inv_sqrt = eig.values.mapv(|v| 1.0 / v.sqrt());
    let sqrt = eig.values.mapv(f64::sqrt);
    // whitening = D^-1/2 E^T, dewhitening = E D^1/2
    let whitening = Array2::from_diag(&inv_sqrt).dot(&eig.vectors.t());
    let dewhitening = eig.vectors.dot(&Array2::from_diag(&sqrt));
    let z = whitening.dot(&centered);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(n_ch);
    for comp in 0..n_ch {
        let mut w = Array1::from_iter((0..n_ch).map(|_| rng.random::<f64>() - 0.5));
        orthogonalize(&mut w, &basis);
        normalize(&mut w);
        let mut converged = false;
        for _ in 0..cfg.max_iter {
            let proj = w.dot(&z);
            let g = proj.mapv(f64::tanh);
            let g_prime_mean = g.iter().map(|t| 1.0 - t * t).sum::<f64>() / n_s as f64;
            let mut next = z.dot(&g) / n_s as f64 - &w * g_prime_mean;
            orthogonalize(&mut next, &basis);
            normalize(&mut next);
            let delta = (next.dot(&w).abs() - 1.0).abs();
            w = next;
            if delta < cfg.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Ok(Err(comp));
        }
        basis.push(w);
    }

    let mut rotation = Array2::zeros((n_ch, n_ch));
    for (i, w) in basis.iter().enumerate() {
        rotation.row_mut(i).assign(w);
    }
    Ok(Ok(IcaDecomposition {
        unmixing: rotation.dot(&whitening),
        mixing: dewhitening.dot(&rotation.t()),
        mean,
    }))
}

fn orthogonalize(w: &mut Array1<f64>, basis: &[Array1<f64>]) {
    for b in basis {
        let p = w.dot(b);
        w.scaled_add(-p, b);
    }
}

fn normalize(w: &mut Array1<f64>) {
    let n = w.dot(w).sqrt();
    if n > 0.0 {
        *w /= n;
    }
}

/// Decomposes the recording, zeroes flagged components and reconstructs.
///
/// Non-convergence is reported through [`IcaStatus::NotConverged`] with the
/// input returned unchanged and no rejections.
pub fn remove_artifacts_ica(rec: &EegRecording, cfg: &IcaConfig) -> Result<IcaOutcome, SignalError> {
    let (n_ch, n_s) = rec.data().dim();
    if n_ch < 2 {
        return Err(SignalError::TooFewChannels(n_ch));
    }
    if n_s < 20 * n_ch {
        return Err(SignalError::TooFewSamples {
            needed: 20 * n_ch,
            found: n_s,
        });
    }
    let decomposition = match fit_fastica(rec.data(), cfg)? {
        Ok(d) => d,
        Err(component) => {
            log::warn!("FastICA did not converge on component {component}; returning input unchanged");
            return Ok(IcaOutcome {
                recording: rec.clone(),
                rejected: Vec::new(),
                status: IcaStatus::NotConverged { component },
                kurtosis: Vec::new(),
            });
        }
    };
    let sources = decomposition.sources(rec.data());
    let kurtosis: Vec<f64> = sources
        .axis_iter(Axis(0))
        .map(|s| excess_kurtosis(s.as_slice().unwrap_or(&s.to_vec())))
        .collect();
    let rejected: Vec<usize> = match &cfg.rejection {
        RejectionMode::Automatic => kurtosis
            .iter()
            .enumerate()
            .filter(|(_, k)| k.abs() > cfg.kurtosis_threshold)
            .map(|(i, _)| i)
            .collect(),
        RejectionMode::Manual(list) => {
            if let Some(&bad) = list.iter().find(|&&c| c >= n_ch) {
                return Err(SignalError::InvalidComponent(bad));
            }
            let mut l = list.clone();
            l.sort_unstable();
            l.dedup();
            l
        }
    };
    let cleaned = decomposition.reconstruct(&sources, &rejected);
    Ok(IcaOutcome {
        recording: rec.with_data(cleaned)?,
        rejected,
        status: IcaStatus::Converged,
        kurtosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::PI;

    fn sources(n: usize) -> Array2<f64> {
        let fs = 256.0;
        Array2::from_shape_fn((4, n), |(c, i)| {
            let t = i as f64 / fs;
            match c {
                0 => (2.0 * PI * 6.0 * t).sin(),
                1 => (2.0 * PI * 11.0 * t + 0.3).sin() * (1.0 + 0.5 * (2.0 * PI * 0.7 * t).sin()),
                2 => (2.0 * PI * 23.0 * t + 1.1).sin(),
                _ => {
                    if i % 97 == 13 {
                        8.0
                    } else {
                        0.0
                    }
                }
            }
        })
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn spike_source_is_rejected() {
        let s = sources(256 * 20);
        let spike: Vec<f64> = s.row(3).to_vec();
        assert!(excess_kurtosis(&spike) > 20.0);
        let mixing = array![
            [1.0, 0.5, 0.3, 0.8],
            [0.4, 1.0, 0.2, 0.6],
            [0.3, 0.6, 1.0, 0.9],
            [0.7, 0.2, 0.5, 1.0]
        ];
        let rec = EegRecording::from_data(256.0, mixing.dot(&s)).unwrap();
        let out = remove_artifacts_ica(&rec, &IcaConfig::default()).unwrap();
        assert_eq!(out.status, IcaStatus::Converged);
        assert_eq!(out.rejected.len(), 1, "kurtosis {:?}", out.kurtosis);
        for ch in out.recording.data().axis_iter(Axis(0)) {
            let r = corr(&ch.to_vec(), &spike);
            assert!(r.abs() < 0.1, "residual correlation {r}");
        }
    }

    #[test]
    fn nothing_rejected_reproduces_input() {
        let s = sources(256 * 10);
        let gaussianish = s.slice(ndarray::s![0..3, ..]).to_owned();
        let mixing = array![[1.0, 0.5, 0.3], [0.2, 1.0, 0.4], [0.6, 0.1, 1.0]];
        let rec = EegRecording::from_data(256.0, mixing.dot(&gaussianish)).unwrap();
        let out = remove_artifacts_ica(&rec, &IcaConfig::default()).unwrap();
        assert!(out.rejected.is_empty(), "{:?}", out.kurtosis);
        let diff = out.recording.data() - rec.data();
        let rms = (diff.mapv(|v| v * v).mean().unwrap()).sqrt();
        assert!(rms < 1e-6);
    }

    #[test]
    fn manual_rejection_of_nothing_is_round_trip() {
        let s = sources(256 * 10);
        let rec = EegRecording::from_data(256.0, s.clone()).unwrap();
        let cfg = IcaConfig { rejection: RejectionMode::Manual(vec![]), ..Default::default() };
        let out = remove_artifacts_ica(&rec, &cfg).unwrap();
        let diff = out.recording.data() - rec.data();
        let rel = diff.mapv(|v| v * v).sum().sqrt() / rec.data().mapv(|v| v * v).sum().sqrt();
        assert!(rel < 1e-6);
        let bad = IcaConfig { rejection: RejectionMode::Manual(vec![9]), ..Default::default() };
        assert!(matches!(remove_artifacts_ica(&rec, &bad), Err(SignalError::InvalidComponent(9))));
    }

    #[test]
    fn single_channel_is_an_error() {
        let rec = EegRecording::from_data(256.0, Array2::zeros((1, 1000))).unwrap();
        assert!(matches!(
            remove_artifacts_ica(&rec, &IcaConfig::default()),
            Err(SignalError::TooFewChannels(1))
        ));
        let short = EegRecording::from_data(256.0, Array2::zeros((4, 50))).unwrap();
        assert!(matches!(
            remove_artifacts_ica(&short, &IcaConfig::default()),
            Err(SignalError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn non_convergence_returns_input() {
        let s = sources(256 * 10);
        let rec = EegRecording::from_data(256.0, s).unwrap();
        let cfg = IcaConfig { max_iter: 1, tol: 0.0, ..Default::default() };
        let out = remove_artifacts_ica(&rec, &cfg).unwrap();
        assert!(matches!(out.status, IcaStatus::NotConverged { .. }));
        assert!(out.rejected.is_empty());
        assert_eq!(out.recording, rec);
    }
}
