use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mentalgen_core::classifier::TrainConfig;
use mentalgen_core::ingest::load_recording;
use mentalgen_core::signal::EegRecording;
use mentalgen_session::gateway::render_base_image;
use mentalgen_session::{session_report, Constraints, DesignSession, ImageRef, Round, SessionConfig, SessionError};
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};
use crate::jobs::TrainJob;
use crate::state::{valid_session_id, AppState};
use crate::ws;

type AppJson<T> = Result<Json<T>, JsonRejection>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rounds", post(start_round))
        .route("/sessions/{id}/ratings", post(submit_ratings))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/events", get(ws::events))
        .route("/sessions/{id}/stream", get(ws::stream))
        .route("/train", post(start_training))
        .route("/train/{id}", get(job_status).delete(cancel_job))
        .route("/images/{digest}", get(image))
        .with_state(state)
}

fn check_version(v: Option<u32>) -> ApiResult<()> {
    match v {
        None | Some(1) => Ok(()),
        Some(other) => Err(ApiError::bad_request(format!("unsupported schema version {other}")).field("v")),
    }
}

fn body<T>(json: AppJson<T>) -> ApiResult<T> {
    Ok(json?.0)
}

/// Relative paths in requests resolve against the data directory.
fn resolve(state: &AppState, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        state.cfg.data_dir.join(path)
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    sessions: usize,
    model_loaded: bool,
    training_jobs: usize,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        sessions: state.session_ids().len(),
        model_loaded: state.model().is_some(),
        training_jobs: state.running_jobs(),
    })
}

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a DesignSession,
    min_rounds_met: bool,
}

fn session_response(status: StatusCode, session: &DesignSession) -> Response {
    (status, Json(SessionView { session, min_rounds_met: session.min_rounds_met() })).into_response()
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "sessions": state.session_ids() }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    v: Option<u32>,
    session_id: Option<String>,
    participant_id: String,
    /// Must already be in the artifact store; a seeded placeholder otherwise.
    base_image: Option<ImageRef>,
    seed: Option<u64>,
    constraints: Option<Constraints>,
    min_rounds: Option<usize>,
}

async fn create_session(State(state): State<Arc<AppState>>, json: AppJson<CreateSession>) -> ApiResult<Response> {
    let req = body(json)?;
    check_version(req.v)?;
    let session_id = req.session_id.unwrap_or_else(|| format!("s-{:016x}", rand::random::<u64>()));
    if !valid_session_id(&session_id) {
        return Err(ApiError::bad_request("session_id must be 1-64 characters of [A-Za-z0-9_-]").field("session_id"));
    }
    if req.participant_id.trim().is_empty() {
        return Err(ApiError::bad_request("participant_id must not be empty").field("participant_id"));
    }
    let seed = req.seed.unwrap_or_else(rand::random);
    let base_image = match req.base_image {
        Some(image) if state.store.contains(&image) => image,
        Some(image) => return Err(SessionError::UnresolvableImage(image.to_string()).into()),
        None => state.store.put(&render_base_image(seed)).map_err(|e| ApiError::internal(e.to_string()))?,
    };
    let config = SessionConfig {
        min_rounds: req.min_rounds.unwrap_or(state.cfg.min_rounds),
        constraints: req.constraints.unwrap_or_default(),
        seed,
    };
    let start = DesignSession::start_event(&session_id, &req.participant_id, base_image, config);
    let slot = state.create_session(start)?;
    let rec = slot.recorder.lock().await;
    Ok(session_response(StatusCode::CREATED, rec.session()))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    let rec = slot.recorder.lock().await;
    Ok(session_response(StatusCode::OK, rec.session()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBody {
    pub sample_rate: f64,
    pub channel_names: Option<Vec<String>>,
    /// channels × samples, microvolts.
    pub data: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplayRef {
    /// EEG CSV file; relative paths resolve against the data directory.
    recording: PathBuf,
    #[serde(default)]
    offset_s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundRequest {
    v: Option<u32>,
    window: Option<WindowBody>,
    replay: Option<ReplayRef>,
}

/// Channel-major rows into a recording; rows must be non-empty and equal.
pub fn rows_to_recording(sample_rate: f64, names: Option<Vec<String>>, rows: Vec<Vec<f64>>) -> Result<EegRecording, String> {
    let n = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err("data must be a non-empty channels × samples array with equal-length rows".into());
    }
    let channels = rows.len();
    let data = Array2::from_shape_vec((channels, n), rows.into_iter().flatten().collect()).expect("shape checked");
    match names {
        Some(names) => EegRecording::new(sample_rate, names, data),
        None => EegRecording::from_data(sample_rate, data),
    }
    .map_err(|e| e.to_string())
}

async fn load_window(state: &AppState, req: RoundRequest) -> ApiResult<EegRecording> {
    match (req.window, req.replay) {
        (Some(w), None) => rows_to_recording(w.sample_rate, w.channel_names, w.data)
            .map_err(|e| ApiError::bad_request(e).field("window")),
        (None, Some(r)) => {
            let path = resolve(state, r.recording);
            let rec = tokio::task::spawn_blocking(move || load_recording(&path))
                .await
                .map_err(|e| ApiError::internal(e.to_string()))?
                .map_err(|e| ApiError::bad_request(e.to_string()).field("replay.recording"))?;
            let start = (r.offset_s * rec.sample_rate()).round();
            if !(start >= 0.0 && (start as usize) < rec.n_samples()) {
                return Err(ApiError::bad_request(format!("offset {} s is outside the recording", r.offset_s))
                    .field("replay.offset_s"));
            }
            rec.with_data(rec.data().slice(s![.., start as usize..]).to_owned())
                .map_err(|e| ApiError::bad_request(e.to_string()).field("replay"))
        }
        _ => Err(ApiError::bad_request("give exactly one of `window` or `replay`").field("window")),
    }
}

async fn start_round(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    json: AppJson<RoundRequest>,
) -> ApiResult<Json<Round>> {
    let slot = state.session(&id)?;
    let req = body(json)?;
    check_version(req.v)?;
    slot.recorder.lock().await.session().can_start_round()?;
    if state.model().is_none() {
        return Err(ApiError::no_model());
    }
    let window = load_window(&state, req).await?;
    let prediction = state.predict_window(window).await?;
    Ok(Json(state.run_round(&slot, prediction).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingsRequest {
    v: Option<u32>,
    ratings: Option<Vec<i64>>,
    final_mark: Option<usize>,
}

async fn submit_ratings(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    json: AppJson<RatingsRequest>,
) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    let req = body(json)?;
    check_version(req.v)?;
    let mut rec = slot.recorder.lock().await;
    let outcome = rec.submit_ratings(req.ratings.as_deref(), req.final_mark);
    slot.publish(&mut rec);
    Ok(Json(outcome?).into_response())
}

async fn report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    let trace = session_report(slot.recorder.lock().await.session())?;
    Ok(([(header::CONTENT_TYPE, "application/json")], trace.to_json()).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    v: Option<u32>,
    /// Dataset directory; relative paths resolve against the data directory.
    dataset: PathBuf,
    training: Option<TrainConfig>,
}

async fn start_training(State(state): State<Arc<AppState>>, json: AppJson<TrainRequest>) -> ApiResult<Response> {
    let req = body(json)?;
    check_version(req.v)?;
    let job_id = format!("job-{:016x}", rand::random::<u64>());
    let job = TrainJob::new(job_id.clone(), resolve(&state, req.dataset));
    state.jobs.lock().unwrap().insert(job_id.clone(), job.clone());
    let train = req.training.unwrap_or_else(|| state.cfg.training.clone());
    let pipeline = state.cfg.pipeline.clone();
    let worker = state.clone();
    tokio::task::spawn_blocking(move || job.run(&worker, &train, &pipeline));
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "job_id": job_id }))).into_response())
}

fn job(state: &AppState, id: &str) -> ApiResult<Arc<TrainJob>> {
    state.jobs.lock().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("training job", id))
}

async fn job_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(job(&state, &id)?.status()).into_response())
}

async fn cancel_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = job(&state, &id)?;
    job.cancel();
    Ok((StatusCode::ACCEPTED, Json(job.status())).into_response())
}

async fn image(State(state): State<Arc<AppState>>, Path(digest): Path<String>) -> ApiResult<Response> {
    let text = if digest.starts_with("sha256:") { digest.clone() } else { format!("sha256:{digest}") };
    let image: ImageRef = text.parse().map_err(|_| ApiError::bad_request("malformed image digest").field("digest"))?;
    let bytes = state.store.get(&image).map_err(|_| ApiError::not_found("image", &digest))?;
    let mime = if bytes.starts_with(b"\x89PNG") { "image/png" } else { "application/octet-stream" };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}
