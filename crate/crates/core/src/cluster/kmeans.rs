use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means with k-means++ seeding; best inertia over `restarts` runs.
///
/// Each restart draws from its own RNG seeded with `seed + restart`, so the
/// result does not depend on how restarts are scheduled across threads.
pub fn kmeans(data: &Array2<f64>, k: usize, seed: u64, restarts: usize) -> Result<Clustering, ClusterError> {
    let n = data.nrows();
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > n {
        return Err(ClusterError::TooManyClusters { k, samples: n });
    }
    let runs: Vec<Clustering> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            lloyd(data, plus_plus_init(data, k, &mut rng))
        })
        .collect();
    // first strictly-better wins, so ties go to the lowest restart index
    let best = runs
        .into_iter()
        .reduce(|best, c| if c.inertia < best.inertia { c } else { best })
        .expect("at least one restart");
    Ok(best)
}

fn plus_plus_init(data: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centroids = Array2::zeros((k, data.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut closest: Vec<f64> = data
        .axis_iter(Axis(0))
        .map(|x| sq_dist(x, centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            closest
                .iter()
                .position(|d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, x) in data.axis_iter(Axis(0)).enumerate() {
            closest[i] = closest[i].min(sq_dist(x, centroids.row(c)));
        }
    }
    centroids
}

fn assign(data: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    data.axis_iter(Axis(0))
        .map(|x| {
            centroids
                .axis_iter(Axis(0))
                .map(|c| sq_dist(x, c))
                .enumerate()
                .fold((0, f64::INFINITY), |best, (j, d)| if d < best.1 { (j, d) } else { best })
        })
        .unzip()
}

fn lloyd(data: &Array2<f64>, mut centroids: Array2<f64>) -> Clustering {
    let k = centroids.nrows();
    let (mut assignments, mut dists) = assign(data, &centroids);
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (x, &a) in data.axis_iter(Axis(0)).zip(&assignments) {
            sums.row_mut(a).scaled_add(1.0, &x);
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids.row_mut(j).assign(&(&sums.row(j) / counts[j] as f64));
            } else {
                // re-seed an empty cluster at the point farthest from its centroid
                let far = dists
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                centroids.row_mut(j).assign(&data.row(far));
                dists[far] = 0.0;
            }
        }
        let (next, next_dists) = assign(data, &centroids);
        let inertia: f64 = next_dists.iter().sum();
        debug_assert!(inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12, "inertia increased");
        prev_inertia = inertia;
        let fixpoint = next == assignments;
        assignments = next;
        dists = next_dists;
        if fixpoint {
            break;
        }
    }
    Clustering {
        inertia: dists.iter().sum(),
        assignments,
        centroids,
    }
}
