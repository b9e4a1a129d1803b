use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::http::StatusCode;
use mentalgen_core::classifier::{IntentModel, Prediction};
use mentalgen_core::pipeline::window_features;
use mentalgen_core::signal::EegRecording;
use mentalgen_session::gateway::{Generator, MockGenerator, RemoteGenerator};
use mentalgen_session::{
    generate_with_limit, ArtifactStore, PromptCorpus, Recorder, Round, SessionError, SessionEvent, SessionLog,
};
use ndarray::s;
use serde::Serialize;
use tokio::sync::broadcast;

use crate::config::{GatewayMode, ServiceConfig};
use crate::error::{ApiError, ApiResult};
use crate::jobs::TrainJob;

pub const MODEL_FILE: &str = "model.json";
const EVENT_BUFFER: usize = 256;

/// One session's recorder behind an async mutex, so every mutation of a
/// session is serialized while different sessions proceed independently.
pub struct SessionSlot {
    pub recorder: tokio::sync::Mutex<Recorder>,
    pub events: broadcast::Sender<String>,
}

/// Frame pushed to `/sessions/{id}/events` subscribers.
#[derive(Debug, Serialize)]
pub struct EventFrame<'a> {
    pub v: u32,
    pub session_id: &'a str,
    pub event: &'a SessionEvent,
}

impl SessionSlot {
    fn new(recorder: Recorder) -> Arc<Self> {
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        Arc::new(Self { recorder: tokio::sync::Mutex::new(recorder), events })
    }

    /// Forwards freshly committed events to subscribers.
    pub fn publish(&self, recorder: &mut Recorder) {
        let id = recorder.session().session_id.clone();
        for event in recorder.drain_committed() {
            let frame = EventFrame { v: 1, session_id: &id, event: &event };
            let _ = self.events.send(serde_json::to_string(&frame).expect("event serializes"));
        }
    }
}

pub struct AppState {
    pub cfg: ServiceConfig,
    pub store: ArtifactStore,
    pub corpus: PromptCorpus,
    pub generator: Arc<dyn Generator>,
    sessions_dir: PathBuf,
    models_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    model: RwLock<Option<Arc<IntentModel>>>,
    pub jobs: Mutex<HashMap<String, Arc<TrainJob>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("session log {path}: {source}")]
    Session { path: PathBuf, source: SessionError },
    #[error("model {path}: {message}")]
    Model { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StartupError + '_ {
    move |source| StartupError::Io { path: path.to_path_buf(), source }
}

/// Session ids become file names, so keep them to a safe alphabet.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl AppState {
    /// Prepares the data directory, loads the model if one exists and
    /// replays every session log.
    pub fn open(cfg: ServiceConfig) -> Result<Arc<Self>, StartupError> {
        let sessions_dir = cfg.data_dir.join("sessions");
        let models_dir = cfg.data_dir.join("models");
        for dir in [&sessions_dir, &models_dir] {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let store = ArtifactStore::open(&cfg.data_dir).map_err(io_err(&cfg.data_dir))?;
        let generator: Arc<dyn Generator> = match cfg.gateway.mode {
            GatewayMode::Mock => Arc::new(MockGenerator::new(store.clone())),
            GatewayMode::Remote => Arc::new(RemoteGenerator::new(cfg.gateway.remote.clone(), store.clone())),
        };

        let model_path = cfg.model.clone().unwrap_or_else(|| models_dir.join(MODEL_FILE));
        let model = if cfg.model.is_some() || model_path.exists() {
            let model = IntentModel::load(&model_path)
                .map_err(|e| StartupError::Model { path: model_path.clone(), message: e.to_string() })?;
            if model.config_fingerprint != cfg.pipeline.fingerprint() {
                return Err(StartupError::Model {
                    path: model_path,
                    message: "trained with a different pipeline configuration".into(),
                });
            }
            Some(Arc::new(model))
        } else {
            None
        };

        let mut sessions = HashMap::new();
        let mut logs: Vec<PathBuf> = std::fs::read_dir(&sessions_dir)
            .map_err(io_err(&sessions_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for path in logs {
            let recorder = Recorder::resume(&path).map_err(|source| StartupError::Session { path: path.clone(), source })?;
            log::info!("restored session {} at round {}", recorder.session().session_id, recorder.session().round_index);
            sessions.insert(recorder.session().session_id.clone(), SessionSlot::new(recorder));
        }

        Ok(Arc::new(Self {
            cfg,
            store,
            corpus: PromptCorpus::default(),
            generator,
            sessions_dir,
            models_dir,
            sessions: RwLock::new(sessions),
            model: RwLock::new(model),
            jobs: Mutex::new(HashMap::new()),
        }))
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        self.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Creates the log and registers the session; the start event is on disk
    /// before this returns.
    pub fn create_session(&self, start: SessionEvent) -> ApiResult<Arc<SessionSlot>> {
        let SessionEvent::SessionStarted { session_id, .. } = &start else {
            return Err(ApiError::internal("expected a session_started event"));
        };
        let mut sessions = self.sessions.write().unwrap();
        if sessions.contains_key(session_id) {
            return Err(SessionError::DuplicateSession(session_id.clone()).into());
        }
        let path = self.sessions_dir.join(format!("{session_id}.jsonl"));
        let log = SessionLog::create(&path).map_err(|e| match e {
            SessionError::Log(m) if path.exists() => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_session", format!("log for `{session_id}` exists: {m}"))
            }
            other => other.into(),
        })?;
        let slot = SessionSlot::new(Recorder::start(start.clone(), Some(log))?);
        sessions.insert(session_id.clone(), slot.clone());
        Ok(slot)
    }

    pub fn model(&self) -> Option<Arc<IntentModel>> {
        self.model.read().unwrap().clone()
    }

    pub fn model_path(&self) -> PathBuf {
        self.cfg.model.clone().unwrap_or_else(|| self.models_dir.join(MODEL_FILE))
    }

    /// Persists and installs a freshly trained model.
    pub fn install_model(&self, model: IntentModel) -> Result<(), String> {
        let path = self.model_path();
        let tmp = path.with_extension("json.tmp");
        model.save(&tmp).map_err(|e| e.to_string())?;
        std::fs::rename(&tmp, &path).map_err(|e| e.to_string())?;
        *self.model.write().unwrap() = Some(Arc::new(model));
        Ok(())
    }

    pub fn generation_limit(&self) -> Duration {
        Duration::from_secs_f64(self.cfg.generation_timeout_s)
    }

    pub fn running_jobs(&self) -> usize {
        self.jobs.lock().unwrap().values().filter(|j| !j.is_done()).count()
    }

    /// Expected channel count for the loaded model, if it divides evenly.
    pub fn expected_channels(&self, model: &IntentModel, sample_rate: f64) -> Option<usize> {
        let per_channel = self.cfg.pipeline.n_features(1, sample_rate);
        (per_channel > 0 && model.n_features() % per_channel == 0).then(|| model.n_features() / per_channel)
    }

    /// Features of the first window of `rec`, then the model's prediction.
    pub async fn predict_window(&self, rec: EegRecording) -> ApiResult<Prediction> {
        let model = self.model().ok_or_else(ApiError::no_model)?;
        let fs = rec.sample_rate();
        if self.expected_channels(&model, fs) != Some(rec.n_channels()) {
            return Err(ApiError::bad_request(format!(
                "model expects {} features; {} channels at {fs} Hz give {}",
                model.n_features(),
                rec.n_channels(),
                self.cfg.pipeline.n_features(rec.n_channels(), fs)
            ))
            .field("window.data"));
        }
        let need = self.cfg.pipeline.window_samples(fs);
        if rec.n_samples() < need {
            return Err(ApiError::bad_request(format!("window needs {need} samples, got {}", rec.n_samples()))
                .field("window.data"));
        }
        let pipeline = self.cfg.pipeline.clone();
        tokio::task::spawn_blocking(move || -> ApiResult<Prediction> {
            let window = rec
                .with_data(rec.data().slice(s![.., ..need]).to_owned())
                .map_err(|e| ApiError::bad_request(e.to_string()).field("window"))?;
            let features = window_features(&window, &pipeline)?.features;
            model.predict(&features).map_err(|e| ApiError::bad_request(e.to_string()).field("window"))
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    /// Records the round start under the session lock, generates without it,
    /// then records the candidates.
    pub async fn run_round(&self, slot: &SessionSlot, prediction: Prediction) -> ApiResult<Round> {
        let requests = {
            let mut rec = slot.recorder.lock().await;
            let requests = rec.begin_round(prediction, &self.corpus);
            slot.publish(&mut rec);
            requests?
        };
        let results = generate_with_limit(self.generator.as_ref(), &requests, self.generation_limit()).await;
        let mut rec = slot.recorder.lock().await;
        let round = rec.finish_round(&results).cloned();
        slot.publish(&mut rec);
        Ok(round?)
    }
}
