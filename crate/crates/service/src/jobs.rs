use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use mentalgen_core::classifier::{train_intent_model_with, ClassifierError, CvReport, TrainConfig, TrainHooks};
use mentalgen_core::ingest::load_dataset;
use mentalgen_core::pipeline::{command_training_set, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::state::AppState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: JobState,
    pub dataset: PathBuf,
    /// Completed and total training steps (folds plus the final refit).
    pub progress: [usize; 2],
    pub windows: Option<usize>,
    pub cv: Option<CvReport>,
    pub error: Option<String>,
}

pub struct TrainJob {
    status: Mutex<JobStatus>,
    cancel: AtomicBool,
}

impl TrainJob {
    pub fn new(job_id: String, dataset: PathBuf) -> Arc<Self> {
        Arc::new(Self {
            status: Mutex::new(JobStatus {
                job_id,
                state: JobState::Queued,
                dataset,
                progress: [0, 0],
                windows: None,
                cv: None,
                error: None,
            }),
            cancel: AtomicBool::new(false),
        })
    }

    pub fn status(&self) -> JobStatus {
        self.status.lock().unwrap().clone()
    }

    pub fn is_done(&self) -> bool {
        matches!(self.status().state, JobState::Succeeded | JobState::Failed | JobState::Cancelled)
    }

    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::Relaxed);
    }

    fn update(&self, f: impl FnOnce(&mut JobStatus)) {
        f(&mut self.status.lock().unwrap());
    }

    /// Loads the dataset, trains and installs the model. Blocking; run it
    /// off the async workers.
    pub fn run(&self, state: &AppState, train: &TrainConfig, pipeline: &PipelineConfig) {
        self.update(|s| s.state = JobState::Running);
        let dataset = self.status().dataset;
        let outcome = load_dataset(&dataset)
            .map_err(|e| e.to_string())
            .and_then(|set| command_training_set(&set, pipeline).map_err(|e| e.to_string()))
            .and_then(|ts| {
                self.update(|s| s.windows = Some(ts.len()));
                let progress = |done: usize, total: usize| self.update(|s| s.progress = [done, total]);
                let hooks = TrainHooks { cancel: Some(&self.cancel), progress: Some(&progress) };
                match train_intent_model_with(&ts, train, &pipeline.fingerprint(), &hooks) {
                    Err(ClassifierError::Cancelled) => Err(None),
                    other => other.map_err(|e| Some(e.to_string())),
                }
                .map_err(|e| e.unwrap_or_default())
                .and_then(|model| {
                    let cv = model.cv.clone();
                    state.install_model(model)?;
                    Ok(cv)
                })
            });
        let cancelled = self.cancel.load(Ordering::Relaxed);
        self.update(|s| match outcome {
            Ok(cv) => {
                s.state = JobState::Succeeded;
                s.cv = Some(cv);
            }
            Err(_) if cancelled => s.state = JobState::Cancelled,
            Err(e) => {
                s.state = JobState::Failed;
                s.error = Some(e);
            }
        });
    }
}
