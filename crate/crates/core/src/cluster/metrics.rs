use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{Clustering, ClusterError};
use crate::signal::{FeatureLabels, SpatialFeature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
}

/// One sample's direction and weight for a single spatial feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedLabel {
    pub direction: Direction,
    pub weight: f64,
}

impl WeightedLabel {
    pub fn new(direction: Direction, weight: f64) -> Self {
        Self { direction, weight }
    }

    /// Direction from the score's sign, weight |score| / 5. A zero score
    /// carries zero weight.
    pub fn from_score(score: f64) -> Self {
        let direction = if score < 0.0 { Direction::Negative } else { Direction::Positive };
        Self { direction, weight: score.abs() / crate::signal::MAX_SCORE }
    }
}

pub type WeightedLabelSet = Vec<WeightedLabel>;

/// Projects feature scores onto one spatial feature.
pub fn labels_for_feature(labels: &[FeatureLabels], feature: SpatialFeature) -> WeightedLabelSet {
    labels.iter().map(|l| WeightedLabel::from_score(l.score(feature))).collect()
}

fn dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_partition(data: &Array2<f64>, clustering: &Clustering) -> Result<Vec<usize>, ClusterError> {
    if data.nrows() != clustering.assignments.len() {
        return Err(ClusterError::LengthMismatch { expected: data.nrows(), found: clustering.assignments.len() });
    }
    let k = clustering.k();
    if k < 2 {
        return Err(ClusterError::NeedTwoClusters(k));
    }
    let sizes = clustering.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(ClusterError::EmptyCluster(empty));
    }
    Ok(sizes)
}

/// Mean silhouette over all samples (Euclidean). Singleton clusters score 0.
pub fn silhouette(data: &Array2<f64>, clustering: &Clustering) -> Result<f64, ClusterError> {
    let sizes = check_partition(data, clustering)?;
    let k = sizes.len();
    let n = data.nrows();
    let rows: Vec<_> = data.axis_iter(Axis(0)).collect();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[clustering.assignments[j]] += dist(rows[i], rows[j]);
            }
        }
        let own = clustering.assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Between- over within-cluster dispersion, scaled by (N − k) / (k − 1).
/// A partition with zero within-cluster dispersion scores 1.
pub fn calinski_harabasz(data: &Array2<f64>, clustering: &Clustering) -> Result<f64, ClusterError> {
    let sizes = check_partition(data, clustering)?;
    let k = sizes.len();
    let n = data.nrows();
    let overall = data.mean_axis(Axis(0)).expect("non-empty");
    let mut centroids = Array2::<f64>::zeros((k, data.ncols()));
    for (x, &a) in data.axis_iter(Axis(0)).zip(&clustering.assignments) {
        centroids.row_mut(a).scaled_add(1.0, &x);
    }
    for (mut c, &s) in centroids.axis_iter_mut(Axis(0)).zip(&sizes) {
        c /= s as f64;
    }
    let between: f64 = centroids
        .axis_iter(Axis(0))
        .zip(&sizes)
        .map(|(c, &s)| s as f64 * dist(c, overall.view()).powi(2))
        .sum();
    let within: f64 = data
        .axis_iter(Axis(0))
        .zip(&clustering.assignments)
        .map(|(x, &a)| dist(x, centroids.row(a)).powi(2))
        .sum();
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n - k) as f64 / (within * (k - 1) as f64))
}

fn check_labels(assignments: &[usize], labels: &[WeightedLabel]) -> Result<(), ClusterError> {
    if assignments.len() != labels.len() {
        return Err(ClusterError::LengthMismatch { expected: assignments.len(), found: labels.len() });
    }
    if let Some(bad) = labels.iter().find(|l| !(l.weight.is_finite() && (0.0..=1.0).contains(&l.weight.abs()))) {
        return Err(ClusterError::InvalidWeight(bad.weight));
    }
    Ok(())
}

/// Weight-scaled purity for one spatial feature.
///
/// Each cluster's representative direction is the one with the larger sum of
/// |w| inside the cluster; the score is the representative mass summed over
/// clusters divided by the total mass W.
pub fn weighted_purity(assignments: &[usize], labels: &[WeightedLabel]) -> Result<f64, ClusterError> {
    check_labels(assignments, labels)?;
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut mass = vec![[0.0f64; 2]; k];
    let mut total = 0.0;
    for (&a, l) in assignments.iter().zip(labels) {
        let slot = match l.direction {
            Direction::Positive => 0,
            Direction::Negative => 1,
        };
        mass[a][slot] += l.weight.abs();
        total += l.weight.abs();
    }
    if total <= 0.0 {
        return Err(ClusterError::ZeroTotalWeight);
    }
    // Σ representative / W, written as 1 − Σ minority / W so single-direction
    // clusters give exactly 1
    let minority: f64 = mass.iter().map(|m| m[0].min(m[1])).sum();
    Ok(1.0 - minority / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub v: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// V-measure with directions as classes. Zero-weight samples carry no
/// direction and are left out, as in [`weighted_purity`].
pub fn v_measure(assignments: &[usize], labels: &[WeightedLabel], beta: f64) -> Result<VMeasure, ClusterError> {
    check_labels(assignments, labels)?;
    let pairs: Vec<(usize, usize)> = assignments
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.weight != 0.0)
        .map(|(&a, l)| (a, matches!(l.direction, Direction::Negative) as usize))
        .collect();
    if pairs.is_empty() {
        return Err(ClusterError::ZeroTotalWeight);
    }
    let n = pairs.len() as f64;
    let k = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let mut table = vec![[0usize; 2]; k];
    for &(a, c) in &pairs {
        table[a][c] += 1;
    }
    let class_totals = [0, 1].map(|c| table.iter().map(|r| r[c]).sum::<usize>());
    let cluster_totals: Vec<usize> = table.iter().map(|r| r[0] + r[1]).collect();

    let h_class = entropy(class_totals.into_iter(), n);
    let h_cluster = entropy(cluster_totals.iter().copied(), n);
    let joint = entropy(table.iter().flat_map(|r| r.iter().copied()), n);
    let h_class_given_cluster = joint - h_cluster;
    let h_cluster_given_class = joint - h_class;

    let homogeneity = if h_class == 0.0 { 1.0 } else { 1.0 - h_class_given_cluster / h_class };
    let completeness = if h_cluster == 0.0 { 1.0 } else { 1.0 - h_cluster_given_class / h_cluster };
    let v = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        (1.0 + beta) * homogeneity * completeness / (beta * homogeneity + completeness)
    };
    Ok(VMeasure { v, homogeneity, completeness })
}
