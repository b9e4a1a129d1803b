//! K-means clustering and cluster evaluation: silhouette, Calinski-Harabasz,
//! weight-scaled purity, V-measure, and model selection over k.

mod kmeans;
mod metrics;
mod select;

pub use kmeans::{kmeans, Clustering, MAX_LLOYD_ITERATIONS};
pub use metrics::{
    calinski_harabasz, labels_for_feature, silhouette, v_measure, weighted_purity, Direction, VMeasure,
    WeightedLabel, WeightedLabelSet,
};
pub use select::{best_by_rank_sum, evaluate_k, select_k, ClusterReport, FeatureScores, Selection, DEFAULT_RESTARTS};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("k = {k} exceeds the {samples} available samples")]
    TooManyClusters { k: usize, samples: usize },
    #[error("metric needs at least 2 clusters, got {0}")]
    NeedTwoClusters(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("total label weight is zero")]
    ZeroTotalWeight,
    #[error("label weight {0} is outside [0, 1]")]
    InvalidWeight(f64),
    #[error("k range is empty")]
    EmptyKRange,
    #[error("k = {k} outside [2, {samples}]")]
    KOutOfRange { k: usize, samples: usize },
}
