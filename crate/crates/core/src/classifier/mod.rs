//! One-vs-rest RBF SVM for decoding design commands from spectral features.

mod intent;
mod svm;

pub use intent::{
    softmax_confidence, stratified_folds, train_intent_model, train_intent_model_with, CvReport, GammaMode,
    IntentModel, Prediction, TrainConfig, TrainHooks, TrainingSet, MODEL_FORMAT, MODEL_VERSION,
};
pub use svm::{rbf, rbf_gram, train_binary_svm, train_with_gram, BinarySvm, SvmFit, SvmParams};

use thiserror::Error;

use crate::signal::{CommandLabel, SignalError};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{name} must be positive and finite, got {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("binary labels must be +1 or -1, got {0}")]
    InvalidBinaryLabel(f64),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("class {command} has {found} samples, fewer than {folds} folds")]
    TooFewPerClass { command: CommandLabel, found: usize, folds: usize },
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("expected {expected} features, found {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("training cancelled")]
    Cancelled,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format: {0}")]
    Format(String),
}
