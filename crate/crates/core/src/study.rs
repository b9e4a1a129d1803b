//! The clustering study over feature-labelled recordings: one feature vector
//! per segment, PCA to a plane, k-means over a range of k, and per-feature
//! label agreement, averaged across participants.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{best_by_rank_sum, select_k, ClusterError, ClusterReport};
use crate::ingest::{IngestError, LabelKind, LabeledSegmentSet};
use crate::pipeline::{extract, feature_matrix, PipelineConfig, PipelineError};
use crate::signal::{FeatureLabels, SpatialFeature};
use crate::spectral::{pca_fit, pca_transform, SpectralError};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("participant {0} has command labels; the study needs feature labels")]
    NotFeatureLabelled(String),
    #[error("participant {participant} has {segments} segments; need at least 3")]
    TooFewSegments { participant: String, segments: usize },
    #[error("no participants given")]
    NoParticipants,
    #[error("invalid k range {0}..={1}")]
    InvalidKRange(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub components: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { k_min: 2, k_max: 8, components: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantReport {
    pub participant_id: String,
    pub segments: usize,
    pub explained_variance_ratio: Vec<f64>,
    pub best_k: usize,
    pub reports: Vec<ClusterReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedScores {
    pub weighted_purity: f64,
    pub v_measure: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    /// Participants with a nonzero label weight for this feature.
    pub participants: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedReport {
    pub k: usize,
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    /// Participants whose segment count admits this k.
    pub participants: usize,
    pub features: BTreeMap<SpatialFeature, AveragedScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    /// Chosen by rank sum over the participant-averaged indices.
    pub best_k: usize,
    pub average: Vec<AveragedReport>,
    pub participants: Vec<ParticipantReport>,
}

/// Mean of a segment's window features: one row per segment.
pub fn segment_features(set: &LabeledSegmentSet, cfg: &PipelineConfig) -> Result<Array2<f64>, PipelineError> {
    let rows = set
        .segments
        .iter()
        .map(|seg| {
            let windows = extract(&seg.recording, cfg)?;
            let d = windows[0].features.len();
            let mut mean = vec![0.0; d];
            for w in &windows {
                mean.iter_mut().zip(&w.features).for_each(|(m, v)| *m += v / windows.len() as f64);
            }
            Ok(mean)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(feature_matrix(&rows))
}

/// Clusters one participant's segments in PCA space for each admissible k.
pub fn cluster_participant(
    set: &LabeledSegmentSet,
    pipeline: &PipelineConfig,
    cfg: &StudyConfig,
) -> Result<ParticipantReport, StudyError> {
    if set.validate()? != LabelKind::Features {
        return Err(StudyError::NotFeatureLabelled(set.participant_id.clone()));
    }
    let n = set.segments.len();
    if n < 3 {
        return Err(StudyError::TooFewSegments { participant: set.participant_id.clone(), segments: n });
    }
    let labels: Vec<FeatureLabels> = set.segments.iter().filter_map(|s| s.label.features().copied()).collect();
    let features = segment_features(set, pipeline)?;
    let components = cfg.components.min((n - 1).min(features.ncols()));
    let pca = pca_fit(&features, components)?;
    let projected = pca_transform(&pca, &features)?;
    let k_max = cfg.k_max.min(n - 1);
    if cfg.k_min < 2 || cfg.k_min > k_max {
        return Err(StudyError::InvalidKRange(cfg.k_min, k_max));
    }
    let selection = select_k(&projected, cfg.k_min..=k_max, cfg.seed, Some(&labels))?;
    Ok(ParticipantReport {
        participant_id: set.participant_id.clone(),
        segments: n,
        explained_variance_ratio: pca.explained_variance_ratio.to_vec(),
        best_k: selection.best_k,
        reports: selection.reports,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Per-participant reports, then each metric averaged across participants
/// for every k.
pub fn cluster_study(
    sets: &[LabeledSegmentSet],
    pipeline: &PipelineConfig,
    cfg: &StudyConfig,
) -> Result<StudyReport, StudyError> {
    if sets.is_empty() {
        return Err(StudyError::NoParticipants);
    }
    let participants = sets
        .iter()
        .map(|set| cluster_participant(set, pipeline, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut by_k: BTreeMap<usize, Vec<&ClusterReport>> = BTreeMap::new();
    for report in participants.iter().flat_map(|p| &p.reports) {
        by_k.entry(report.k).or_default().push(report);
    }
    let average: Vec<AveragedReport> = by_k
        .into_iter()
        .map(|(k, reports)| {
            let mut features = BTreeMap::new();
            for feature in SpatialFeature::ALL {
                let scores: Vec<_> = reports.iter().filter_map(|r| r.features.get(&feature)).collect();
                if scores.is_empty() {
                    continue;
                }
                features.insert(
                    feature,
                    AveragedScores {
                        weighted_purity: mean(scores.iter().map(|s| s.weighted_purity)),
                        v_measure: mean(scores.iter().map(|s| s.v_measure.v)),
                        homogeneity: mean(scores.iter().map(|s| s.v_measure.homogeneity)),
                        completeness: mean(scores.iter().map(|s| s.v_measure.completeness)),
                        participants: scores.len(),
                    },
                );
            }
            AveragedReport {
                k,
                silhouette: mean(reports.iter().map(|r| r.silhouette)),
                calinski_harabasz: mean(reports.iter().map(|r| r.calinski_harabasz)),
                participants: reports.len(),
                features,
            }
        })
        .collect();
    let sil: Vec<f64> = average.iter().map(|a| a.silhouette).collect();
    let ch: Vec<f64> = average.iter().map(|a| a.calinski_harabasz).collect();
    let best_k = average[best_by_rank_sum(&sil, &ch)].k;
    Ok(StudyReport { config: cfg.clone(), best_k, average, participants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_generate, SynthSpec};

    fn five(seed: u64) -> LabeledSegmentSet {
        let mut set = synth_generate(&SynthSpec::five_clusters(20, 4.0, 5.0, seed)).unwrap();
        set.participant_id = format!("p{seed}");
        set
    }

    #[test]
    fn five_cluster_fixture_selects_five() {
        let report = cluster_study(&[five(1), five(2)], &PipelineConfig::default(), &StudyConfig::default()).unwrap();
        assert_eq!(report.best_k, 5);
        assert!(report.participants.iter().all(|p| p.best_k == 5));
        let k5 = report.average.iter().find(|a| a.k == 5).unwrap();
        assert_eq!(k5.participants, 2);
        for scores in k5.features.values() {
            assert!((scores.weighted_purity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn averaging_is_the_plain_mean() {
        let sets = [five(3), five(4)];
        let report = cluster_study(&sets, &PipelineConfig::default(), &StudyConfig::default()).unwrap();
        for avg in &report.average {
            let sil: Vec<f64> = report.participants.iter().map(|p| p.reports.iter().find(|r| r.k == avg.k).unwrap().silhouette).collect();
            assert!((avg.silhouette - (sil[0] + sil[1]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn command_labels_rejected() {
        let set = synth_generate(&SynthSpec::commands(2, 2.0, 1.0, 0)).unwrap();
        let err = cluster_study(&[set], &PipelineConfig::default(), &StudyConfig::default()).unwrap_err();
        assert!(matches!(err, StudyError::NotFeatureLabelled(_)));
        assert!(matches!(cluster_study(&[], &PipelineConfig::default(), &StudyConfig::default()), Err(StudyError::NoParticipants)));
    }
}
