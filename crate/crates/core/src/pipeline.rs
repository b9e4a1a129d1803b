//! Raw recording to feature vectors: window, band-pass, optional ICA, Welch,
//! band powers.
//!
//! Every window is filtered on its own so that offline training and live
//! prediction on a single streamed window apply the same transform.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{ClassifierError, TrainingSet};
use crate::ingest::LabeledSegmentSet;
use crate::signal::{
    bandpass_filter, epoch_windows, remove_artifacts_ica, EegRecording, FilterSpec, IcaConfig, IcaStatus,
    SignalError,
};
use crate::spectral::{band_powers, welch_channels, SpectralError, WelchConfig, BANDS, N_BANDS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("segment {0} has no command label")]
    MissingCommand(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// ln of the five band powers per channel.
    LogBandPower,
    /// ln of every PSD bin in [0.5, 45] Hz per channel.
    PsdBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub filter: FilterSpec,
    /// ICA artifact rejection per window; off unless configured.
    pub ica: Option<IcaConfig>,
    pub window_s: f64,
    pub overlap_s: f64,
    pub welch: WelchConfig,
    pub features: FeatureKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            ica: None,
            window_s: 2.0,
            overlap_s: 0.5,
            welch: WelchConfig::default(),
            features: FeatureKind::LogBandPower,
        }
    }
}

impl PipelineConfig {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn window_samples(&self, sample_rate: f64) -> usize {
        (self.window_s * sample_rate).round() as usize
    }

    /// Feature-vector length for a recording layout.
    pub fn n_features(&self, channels: usize, sample_rate: f64) -> usize {
        match self.features {
            FeatureKind::LogBandPower => channels * N_BANDS,
            FeatureKind::PsdBins => {
                let seg = self.welch.segment_len(sample_rate);
                let df = sample_rate / seg as f64;
                channels * (0..seg / 2 + 1).filter(|&k| in_feature_range(k as f64 * df)).count()
            }
        }
    }
}

fn in_feature_range(f: f64) -> bool {
    f >= BANDS[0].low && f <= BANDS[N_BANDS - 1].high
}

/// Features of one window, with its offset in the source recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub start_time: f64,
    pub features: Vec<f64>,
    /// ICA status when ICA ran on this window.
    pub ica: Option<IcaStatus>,
}

/// Preprocesses one window (a recording exactly one window long or longer,
/// used whole) and returns its feature vector.
pub fn window_features(window: &EegRecording, cfg: &PipelineConfig) -> Result<WindowFeatures, PipelineError> {
    let filtered = bandpass_filter(window, &cfg.filter)?;
    let (clean, ica) = match &cfg.ica {
        Some(ica_cfg) => {
            let outcome = remove_artifacts_ica(&filtered, ica_cfg)?;
            (outcome.recording, Some(outcome.status))
        }
        None => (filtered, None),
    };
    let fs = clean.sample_rate();
    let psd = welch_channels(clean.data().view(), fs, cfg.welch.segment_len(fs), cfg.welch.overlap_fraction)?;
    let features = match cfg.features {
        FeatureKind::LogBandPower => band_powers(&psd)?.log(),
        FeatureKind::PsdBins => {
            let keep: Vec<usize> = (0..psd.freqs.len()).filter(|&k| in_feature_range(psd.freqs[k])).collect();
            psd.power
                .axis_iter(Axis(0))
                .flat_map(|row| keep.iter().map(move |&k| row[k].max(1e-30).ln()).collect::<Vec<_>>())
                .collect()
        }
    };
    Ok(WindowFeatures { start_time: 0.0, features, ica })
}

/// Cuts the recording into windows and extracts features from each.
pub fn extract(rec: &EegRecording, cfg: &PipelineConfig) -> Result<Vec<WindowFeatures>, PipelineError> {
    epoch_windows(rec, cfg.window_s, cfg.overlap_s)?
        .into_iter()
        .map(|epoch| {
            let window = rec.with_data(epoch.data)?;
            let mut wf = window_features(&window, cfg)?;
            wf.start_time = epoch.start_time;
            Ok(wf)
        })
        .collect()
}

/// Stacks feature vectors into a samples × features matrix.
pub fn feature_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Array2::from_shape_vec((rows.len(), d), flat).expect("rows share a length")
}

/// Windows every command-labelled segment and stacks the features.
pub fn command_training_set(set: &LabeledSegmentSet, cfg: &PipelineConfig) -> Result<TrainingSet, PipelineError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, seg) in set.segments.iter().enumerate() {
        let command = seg.label.command().ok_or(PipelineError::MissingCommand(i))?;
        for w in extract(&seg.recording, cfg)? {
            rows.push(w.features);
            labels.push(command);
        }
    }
    Ok(TrainingSet::new(feature_matrix(&rows), labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, seconds: f64, channels: usize) -> EegRecording {
        let n = (seconds * 256.0) as usize;
        let data = Array2::from_shape_fn((channels, n), |(c, i)| {
            (1.0 + c as f64) * (2.0 * PI * freq * i as f64 / 256.0).sin()
        });
        EegRecording::from_data(256.0, data).unwrap()
    }

    #[test]
    fn dimensions_follow_config() {
        let rec = tone(10.0, 12.0, 3);
        let cfg = PipelineConfig::default();
        let out = extract(&rec, &cfg).unwrap();
        assert_eq!(out.len(), 7);
        assert!(out.iter().all(|w| w.features.len() == 15));
        assert_eq!(out[1].start_time, 1.5);
        assert_eq!(cfg.n_features(14, 256.0), 70);

        let bins = PipelineConfig { features: FeatureKind::PsdBins, ..PipelineConfig::default() };
        let out = extract(&rec, &bins).unwrap();
        assert_eq!(out[0].features.len(), bins.n_features(3, 256.0));
    }

    #[test]
    fn alpha_tone_peaks_in_alpha() {
        let rec = tone(10.0, 2.0, 2);
        let f = window_features(&rec, &PipelineConfig::default()).unwrap().features;
        for ch in 0..2 {
            let row = &f[ch * N_BANDS..(ch + 1) * N_BANDS];
            let best = (0..N_BANDS).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, 2);
        }
    }

    #[test]
    fn fingerprint_tracks_config() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { overlap_s: 1.0, ..a.clone() };
        assert_eq!(a.fingerprint(), PipelineConfig::default().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn short_recording_is_an_error() {
        let rec = tone(10.0, 1.0, 2);
        assert!(matches!(extract(&rec, &PipelineConfig::default()), Err(PipelineError::Signal(_))));
    }
}
