//! Binary RBF-kernel SVM trained by SMO with maximal-violating-pair selection.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Curvature floor for the two-variable subproblem.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    /// Upper bound on SMO pair updates; `None` means max(10⁷, 100·n).
    pub max_iter: Option<usize>,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self { c, gamma, tol: 1e-3, max_iter: None }
    }
}

pub fn rbf(gamma: f64, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// Full RBF Gram matrix of the rows of `x`.
pub fn rbf_gram(x: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    let sq: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.dot(&r)).collect();
    let mut k = x.dot(&x.t());
    for i in 0..n {
        for j in 0..n {
            let d = (sq[i] + sq[j] - 2.0 * k[[i, j]]).max(0.0);
            k[[i, j]] = (-gamma * d).exp();
        }
    }
    for i in 0..n {
        k[[i, i]] = 1.0;
    }
    k
}

/// A trained two-class machine: f(x) = Σ coef_i K(sv_i, x) + bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Array2<f64>,
    /// Signed multipliers α_i·y_i of the support vectors.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.support_vectors
            .axis_iter(Axis(0))
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn decision_batch(&self, x: &Array2<f64>) -> Array1<f64> {
        x.axis_iter(Axis(0)).map(|r| self.decision(r)).collect()
    }

    /// Largest KKT violation over a training set, measured on y·f(x):
    /// α = 0 needs y·f ≥ 1, 0 < α < C needs y·f = 1, α = C needs y·f ≤ 1.
    /// `alphas` are the unsigned multipliers of every training point.
    pub fn kkt_violation(&self, x: &Array2<f64>, y: &[f64], alphas: &[f64]) -> f64 {
        x.axis_iter(Axis(0))
            .zip(y)
            .zip(alphas)
            .map(|((row, &yi), &a)| {
                let margin = yi * self.decision(row);
                let at_lower = a <= 0.0;
                let at_upper = a >= self.c;
                if at_lower {
                    (1.0 - margin).max(0.0)
                } else if at_upper {
                    (margin - 1.0).max(0.0)
                } else {
                    (margin - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Result of a solve: the machine plus all training multipliers.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: BinarySvm,
    pub alphas: Vec<f64>,
}

fn check_inputs(x: &Array2<f64>, y: &[f64], params: &SvmParams) -> Result<(), ClassifierError> {
    if x.nrows() != y.len() {
        return Err(ClassifierError::LengthMismatch { expected: x.nrows(), found: y.len() });
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(ClassifierError::InvalidHyperparameter { name: "C", value: params.c });
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(ClassifierError::InvalidHyperparameter { name: "gamma", value: params.gamma });
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(ClassifierError::InvalidBinaryLabel(*bad));
    }
    let has_pos = y.iter().any(|&v| v > 0.0);
    let has_neg = y.iter().any(|&v| v < 0.0);
    if !(has_pos && has_neg) {
        return Err(ClassifierError::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ClassifierError::NonFinite);
    }
    Ok(())
}

pub fn train_binary_svm(x: &Array2<f64>, y: &[f64], params: &SvmParams) -> Result<SvmFit, ClassifierError> {
    check_inputs(x, y, params)?;
    let gram = rbf_gram(x, params.gamma);
    train_with_gram(x, y, &gram, params)
}

/// SMO on a precomputed Gram matrix (shared across one-vs-rest machines).
pub fn train_with_gram(
    x: &Array2<f64>,
    y: &[f64],
    gram: &Array2<f64>,
    params: &SvmParams,
) -> Result<SvmFit, ClassifierError> {
    check_inputs(x, y, params)?;
    let n = y.len();
    let c = params.c;
    let max_iter = params.max_iter.unwrap_or_else(|| (100 * n).max(10_000_000));
    let mut alpha = vec![0.0f64; n];
    // gradient of ½αᵀQα − eᵀα with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0f64; n];

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let q_ij = y[i] * y[j] * gram[[i, j]];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (gram[[i, i]] + gram[[j, j]] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (gram[[i, i]] + gram[[j, j]] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * gram[[t, i]] * di + y[j] * gram[[t, j]] * dj);
        }
    }
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without meeting tol {}", params.tol);
    }

    let bias = -rho(&alpha, y, &grad, c);
    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let mut support_vectors = Array2::zeros((support.len(), x.ncols()));
    for (row, &t) in support.iter().enumerate() {
        support_vectors.row_mut(row).assign(&x.row(t));
    }
    let dual_coef = support.iter().map(|&t| alpha[t] * y[t]).collect();
    Ok(SvmFit {
        model: BinarySvm { support_vectors, dual_coef, bias, gamma: params.gamma, c, iterations, converged },
        alphas: alpha,
    })
}

/// Offset: mean of y·∇ over free multipliers, else the midpoint of the feasible interval.
fn rho(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xor_is_separated() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [1.0, 1.0, -1.0, -1.0];
        let fit = train_binary_svm(&x, &y, &SvmParams::new(10.0, 1.0)).unwrap();
        for (row, &yi) in x.axis_iter(Axis(0)).zip(&y) {
            assert!(fit.model.decision(row) * yi > 0.0);
        }
        assert!(fit.model.kkt_violation(&x, &y, &fit.alphas) <= 1e-3);
    }

    #[test]
    fn separable_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40;
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let centre = if i < n / 2 { -3.0 } else { 3.0 };
            centre + rng.random::<f64>() - 0.5
        });
        let y: Vec<f64> = (0..n).map(|i| if i < n / 2 { -1.0 } else { 1.0 }).collect();
        let fit = train_binary_svm(&x, &y, &SvmParams::new(1.0, 0.5)).unwrap();
        let acc = x
            .axis_iter(Axis(0))
            .zip(&y)
            .filter(|(r, &yi)| fit.model.decision(*r) * yi > 0.0)
            .count();
        assert_eq!(acc, n);
        assert!(fit.model.dual_coef.iter().all(|a| a.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(train_binary_svm(&x, &[1.0, 1.0], &SvmParams::new(1.0, 1.0)), Err(ClassifierError::SingleClass)));
        assert!(matches!(
            train_binary_svm(&x, &[1.0, -1.0], &SvmParams::new(0.0, 1.0)),
            Err(ClassifierError::InvalidHyperparameter { name: "C", .. })
        ));
        assert!(matches!(
            train_binary_svm(&x, &[1.0, -1.0], &SvmParams::new(1.0, -1.0)),
            Err(ClassifierError::InvalidHyperparameter { name: "gamma", .. })
        ));
        assert!(train_binary_svm(&x, &[1.0, 0.0], &SvmParams::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn gram_matches_pairwise_kernel() {
        let x = array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]];
        let g = rbf_gram(&x, 0.3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[[i, j]] - rbf(0.3, x.row(i), x.row(j))).abs() < 1e-12);
            }
        }
    }
}
