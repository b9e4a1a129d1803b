use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svm::{rbf_gram, train_with_gram, BinarySvm, SvmParams};
use super::ClassifierError;
use crate::signal::{zscore_apply, zscore_fit, zscore_vector, CommandLabel, NormStats};

pub const MODEL_FORMAT: &str = "mentalgen-intent-model";
pub const MODEL_VERSION: u32 = 1;

const N_COMMANDS: usize = CommandLabel::ALL.len();

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub features: Array2<f64>,
    pub labels: Vec<CommandLabel>,
}

impl TrainingSet {
    pub fn new(features: Array2<f64>, labels: Vec<CommandLabel>) -> Result<Self, ClassifierError> {
        if features.nrows() != labels.len() {
            return Err(ClassifierError::LengthMismatch { expected: features.nrows(), found: labels.len() });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite);
        }
        let first = labels.first().copied();
        if labels.iter().all(|l| Some(*l) == first) {
            return Err(ClassifierError::SingleClass);
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> [usize; N_COMMANDS] {
        let mut counts = [0; N_COMMANDS];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum GammaMode {
    /// 1 / (d · mean feature variance) of the normalized training features.
    Scale,
    Fixed(f64),
}

impl GammaMode {
    fn resolve(self, x: &Array2<f64>) -> f64 {
        match self {
            GammaMode::Fixed(g) => g,
            GammaMode::Scale => {
                let var = x.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
                if var > 0.0 {
                    1.0 / (x.ncols() as f64 * var)
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub c: f64,
    pub gamma: GammaMode,
    pub folds: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { c: 1.0, gamma: GammaMode::Scale, folds: 10, tol: 1e-3, seed: 0 }
    }
}

/// Cancellation flag and per-fold progress callback for long training runs.
#[derive(Default)]
pub struct TrainHooks<'a> {
    pub cancel: Option<&'a AtomicBool>,
    /// Called with (finished folds, total folds); the final refit counts as one more step.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

impl TrainHooks<'_> {
    fn check(&self) -> Result<(), ClassifierError> {
        match self.cancel {
            Some(flag) if flag.load(Ordering::Relaxed) => Err(ClassifierError::Cancelled),
            _ => Ok(()),
        }
    }

    fn report(&self, done: usize, total: usize) {
        if let Some(f) = self.progress {
            f(done, total);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    /// Mean of per-fold held-out accuracy.
    pub overall: f64,
    /// Held-out recall of each command pooled over folds, in command order.
    pub per_command: [f64; N_COMMANDS],
    pub fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub command: CommandLabel,
    pub confidence: f64,
    pub decision_values: [f64; N_COMMANDS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentModel {
    pub format: String,
    pub version: u32,
    /// One machine per command, in command order.
    pub machines: Vec<BinarySvm>,
    pub norm: NormStats,
    /// Digest of the feature-extraction configuration the model was trained on.
    pub config_fingerprint: String,
    pub config: TrainConfig,
    pub cv: CvReport,
}

/// Argmax (lowest index on ties) and the max of softmax(values).
pub fn softmax_confidence(values: &[f64; N_COMMANDS]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let max = values[best];
    let denom: f64 = values.iter().map(|v| (v - max).exp()).sum();
    (best, 1.0 / denom)
}

impl IntentModel {
    pub fn n_features(&self) -> usize {
        self.norm.n_features()
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction, ClassifierError> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite);
        }
        let z = zscore_vector(&self.norm, features).map_err(|_| ClassifierError::FeatureMismatch {
            expected: self.n_features(),
            found: features.len(),
        })?;
        let z = ndarray::ArrayView1::from(&z);
        let mut values = [0.0; N_COMMANDS];
        for (v, m) in values.iter_mut().zip(&self.machines) {
            *v = m.decision(z);
        }
        let (best, confidence) = softmax_confidence(&values);
        Ok(Prediction {
            command: CommandLabel::from_index(best).expect("index below command count"),
            confidence,
            decision_values: values,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let model: IntentModel = serde_json::from_str(text).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(ClassifierError::Format(format!("unexpected format tag `{}`", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(ClassifierError::Format(format!("unsupported version {}", model.version)));
        }
        if model.machines.len() != N_COMMANDS {
            return Err(ClassifierError::Format(format!("expected {N_COMMANDS} machines, found {}", model.machines.len())));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Stratified fold index per sample: each class is shuffled with the seed and
/// dealt round-robin, continuing the deal across classes.
pub fn stratified_folds(labels: &[CommandLabel], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut dealt = 0;
    for command in CommandLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == command).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold_of[i] = dealt % folds;
            dealt += 1;
        }
    }
    fold_of
}

fn select_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Normalizes, then fits the three one-vs-rest machines on a shared Gram matrix.
fn fit_ovr(
    x: &Array2<f64>,
    labels: &[CommandLabel],
    cfg: &TrainConfig,
) -> Result<(NormStats, Vec<BinarySvm>), ClassifierError> {
    let norm = zscore_fit(x)?;
    let z = zscore_apply(&norm, x)?;
    let gamma = cfg.gamma.resolve(&z);
    let params = SvmParams { c: cfg.c, gamma, tol: cfg.tol, max_iter: None };
    let gram = rbf_gram(&z, gamma);
    let machines = CommandLabel::ALL
        .iter()
        .map(|&command| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == command { 1.0 } else { -1.0 }).collect();
            train_with_gram(&z, &y, &gram, &params).map(|fit| fit.model)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((norm, machines))
}

pub fn train_intent_model(
    ts: &TrainingSet,
    cfg: &TrainConfig,
    config_fingerprint: &str,
) -> Result<IntentModel, ClassifierError> {
    train_intent_model_with(ts, cfg, config_fingerprint, &TrainHooks::default())
}

/// Stratified k-fold CV with per-fold normalization, then a refit on all data.
pub fn train_intent_model_with(
    ts: &TrainingSet,
    cfg: &TrainConfig,
    config_fingerprint: &str,
    hooks: &TrainHooks<'_>,
) -> Result<IntentModel, ClassifierError> {
    if cfg.folds < 2 {
        return Err(ClassifierError::InvalidFolds(cfg.folds));
    }
    for (name, value) in [("C", cfg.c), ("tol", cfg.tol)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ClassifierError::InvalidHyperparameter { name, value });
        }
    }
    if let GammaMode::Fixed(g) = cfg.gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(ClassifierError::InvalidHyperparameter { name: "gamma", value: g });
        }
    }
    let counts = ts.class_counts();
    for command in CommandLabel::ALL {
        if counts[command.index()] < cfg.folds {
            return Err(ClassifierError::TooFewPerClass { command, found: counts[command.index()], folds: cfg.folds });
        }
    }

    let fold_of = stratified_folds(&ts.labels, cfg.folds, cfg.seed);
    let total_steps = cfg.folds + 1;
    let mut fold_accuracy = Vec::with_capacity(cfg.folds);
    let mut hits = [0usize; N_COMMANDS];
    for fold in 0..cfg.folds {
        hooks.check()?;
        let (test, train): (Vec<usize>, Vec<usize>) = (0..ts.len()).partition(|&i| fold_of[i] == fold);
        let train_labels: Vec<CommandLabel> = train.iter().map(|&i| ts.labels[i]).collect();
        let (norm, machines) = fit_ovr(&select_rows(&ts.features, &train), &train_labels, cfg)?;
        let fold_model = IntentModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            machines,
            norm,
            config_fingerprint: String::new(),
            config: cfg.clone(),
            cv: CvReport { folds: 0, overall: 0.0, per_command: [0.0; N_COMMANDS], fold_accuracy: vec![] },
        };
        let mut correct = 0;
        for &i in &test {
            let row = ts.features.row(i);
            let pred = fold_model.predict(row.as_slice().expect("standard layout"))?;
            if pred.command == ts.labels[i] {
                correct += 1;
                hits[ts.labels[i].index()] += 1;
            }
        }
        fold_accuracy.push(correct as f64 / test.len() as f64);
        hooks.report(fold + 1, total_steps);
    }
    hooks.check()?;
    let (norm, machines) = fit_ovr(&ts.features, &ts.labels, cfg)?;
    hooks.report(total_steps, total_steps);

    let overall = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
    let per_command = [0, 1, 2].map(|c| hits[c] as f64 / counts[c] as f64);
    Ok(IntentModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        machines,
        norm,
        config_fingerprint: config_fingerprint.into(),
        config: cfg.clone(),
        cv: CvReport { folds: cfg.folds, overall, per_command, fold_accuracy },
    })
}
