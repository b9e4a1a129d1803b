use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    calinski_harabasz, kmeans, labels_for_feature, silhouette, v_measure, weighted_purity, ClusterError, VMeasure,
};
use crate::signal::{FeatureLabels, SpatialFeature};

pub const DEFAULT_RESTARTS: usize = 10;

/// Label-agreement scores of one spatial feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    pub weighted_purity: f64,
    pub v_measure: VMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    /// Empty when the data carried no feature labels.
    pub features: BTreeMap<SpatialFeature, FeatureScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best_k: usize,
    pub reports: Vec<ClusterReport>,
}

/// Clusters at `k` and scores the partition, plus per-feature agreement when
/// labels are given. Features whose labels are all zero are skipped.
pub fn evaluate_k(
    data: &Array2<f64>,
    k: usize,
    seed: u64,
    labels: Option<&[FeatureLabels]>,
) -> Result<ClusterReport, ClusterError> {
    let clustering = kmeans(data, k, seed, DEFAULT_RESTARTS)?;
    let mut features = BTreeMap::new();
    if let Some(labels) = labels {
        for feature in SpatialFeature::ALL {
            let set = labels_for_feature(labels, feature);
            match weighted_purity(&clustering.assignments, &set) {
                Ok(purity) => {
                    let v = v_measure(&clustering.assignments, &set, 1.0)?;
                    features.insert(feature, FeatureScores { weighted_purity: purity, v_measure: v });
                }
                Err(ClusterError::ZeroTotalWeight) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(ClusterReport {
        k,
        inertia: clustering.inertia,
        silhouette: silhouette(data, &clustering)?,
        calinski_harabasz: calinski_harabasz(data, &clustering)?,
        features,
    })
}

/// Competition ranks, 1 = largest value.
fn ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|o| *o > v).count())
        .collect()
}

/// Index of the best (silhouette, CH) pair by rank sum; ties go to the earlier entry.
pub fn best_by_rank_sum(silhouettes: &[f64], ch: &[f64]) -> usize {
    let rs = ranks(silhouettes);
    let rc = ranks(ch);
    (0..rs.len())
        .min_by_key(|&i| (rs[i] + rc[i], i))
        .unwrap_or(0)
}

/// Scores every k in `k_range` and picks the one with the lowest
/// silhouette-rank + CH-rank (smaller k on ties).
pub fn select_k(
    data: &Array2<f64>,
    k_range: impl IntoIterator<Item = usize>,
    seed: u64,
    labels: Option<&[FeatureLabels]>,
) -> Result<Selection, ClusterError> {
    let mut ks: Vec<usize> = k_range.into_iter().collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(ClusterError::EmptyKRange);
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2 || k > data.nrows()) {
        return Err(ClusterError::KOutOfRange { k: bad, samples: data.nrows() });
    }
    let reports = ks
        .iter()
        .map(|&k| evaluate_k(data, k, seed, labels))
        .collect::<Result<Vec<_>, _>>()?;
    let sil: Vec<f64> = reports.iter().map(|r| r.silhouette).collect();
    let ch: Vec<f64> = reports.iter().map(|r| r.calinski_harabasz).collect();
    let best_k = reports[best_by_rank_sum(&sil, &ch)].k;
    Ok(Selection { best_k, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[(f64, f64)], per: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let v: Vec<f64> = centers
            .iter()
            .flat_map(|&(x, y)| (0..per).map(move |_| (x, y)))
            .flat_map(|(x, y)| [x + noise.sample(&mut rng), y + noise.sample(&mut rng)])
            .collect();
        Array2::from_shape_vec((centers.len() * per, 2), v).unwrap()
    }

    #[test]
    fn five_blobs_select_five() {
        let data = blobs(&[(0.0, 0.0), (30.0, 0.0), (0.0, 30.0), (30.0, 30.0), (15.0, 60.0)], 30);
        let sel = select_k(&data, 2..=8, 7, None).unwrap();
        assert_eq!(sel.best_k, 5);
        assert_eq!(sel.reports.len(), 7);
        assert_eq!(sel, select_k(&data, 2..=8, 7, None).unwrap());
    }

    #[test]
    fn two_blobs_select_two() {
        let data = blobs(&[(0.0, 0.0), (40.0, 40.0)], 25);
        assert_eq!(select_k(&data, 2..=4, 1, None).unwrap().best_k, 2);
    }

    #[test]
    fn empty_range_is_an_error() {
        let data = blobs(&[(0.0, 0.0)], 5);
        assert!(matches!(select_k(&data, std::iter::empty(), 0, None), Err(ClusterError::EmptyKRange)));
        assert!(matches!(select_k(&data, [1], 0, None), Err(ClusterError::KOutOfRange { .. })));
    }

    #[test]
    fn rank_sum_prefers_smaller_k_on_ties() {
        assert_eq!(best_by_rank_sum(&[0.5, 0.9], &[10.0, 5.0]), 0);
        assert_eq!(best_by_rank_sum(&[0.5, 0.9, 0.1], &[10.0, 20.0, 1.0]), 1);
    }
}
