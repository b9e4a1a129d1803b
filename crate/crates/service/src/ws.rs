//! `/sessions/{id}/events` pushes committed session events;
//! `/sessions/{id}/stream` takes live EEG chunks and runs a round per window.

use std::sync::Arc;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use mentalgen_session::{Round, SessionError};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::error::ApiResult;
use crate::routes::rows_to_recording;
use crate::state::{AppState, SessionSlot};

pub const CLOSE_MALFORMED: u16 = 4000;
pub const CLOSE_CHANNELS: u16 = 4001;
pub const CLOSE_SAMPLE_RATE: u16 = 4002;
pub const CLOSE_NO_MODEL: u16 = 4003;
pub const CLOSE_INACTIVE: u16 = 4009;
pub const CLOSE_INTERNAL: u16 = 1011;

pub async fn events(
    ws: WebSocketUpgrade,
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let rx = state.session(&id)?.events.subscribe();
    Ok(ws.on_upgrade(move |socket| forward_events(socket, rx)))
}

async fn forward_events(mut socket: WebSocket, mut rx: tokio::sync::broadcast::Receiver<String>) {
    loop {
        tokio::select! {
            event = rx.recv() => match event {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(skipped)) => {
                    let note = serde_json::json!({ "v": 1, "type": "lagged", "skipped": skipped }).to_string();
                    if socket.send(Message::Text(note.into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub async fn stream(
    ws: WebSocketUpgrade,
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let slot = state.session(&id)?;
    Ok(ws.on_upgrade(move |socket| run_stream(state, slot, socket)))
}

/// One chunk of live EEG: channels × samples.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChunkFrame {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    sample_rate: f64,
    data: Vec<Vec<f64>>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum StreamReply<'a> {
    CandidatesReady { v: u32, round: &'a Round },
    WindowSkipped { v: u32, reason: String },
}

struct Closing(u16, String);

async fn close(mut socket: WebSocket, Closing(code, reason): Closing) {
    log::debug!("closing stream: {code} {reason}");
    let _ = socket.send(Message::Close(Some(CloseFrame { code, reason: reason.into() }))).await;
}

async fn send(socket: &mut WebSocket, reply: &StreamReply<'_>) -> bool {
    let text = serde_json::to_string(reply).expect("reply serializes");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn run_stream(state: Arc<AppState>, slot: Arc<SessionSlot>, mut socket: WebSocket) {
    let outcome = pump(&state, &slot, &mut socket).await;
    if let Err(closing) = outcome {
        close(socket, closing).await;
    }
}

fn inactive(slot_err: &SessionError) -> bool {
    matches!(slot_err, SessionError::Finalized(_))
}

/// Accumulates chunks; each full window becomes one round. Returns `Ok` when
/// the client leaves and `Err` with a close code on protocol violations.
async fn pump(state: &AppState, slot: &SessionSlot, socket: &mut WebSocket) -> Result<(), Closing> {
    if slot.recorder.lock().await.session().is_finalized() {
        return Err(Closing(CLOSE_INACTIVE, "session is finalized".into()));
    }
    let mut sample_rate: Option<f64> = None;
    let mut buffer: Vec<Vec<f64>> = Vec::new();
    while let Some(msg) = socket.recv().await {
        let text = match msg {
            Ok(Message::Text(text)) => text,
            Ok(Message::Close(_)) | Err(_) => return Ok(()),
            Ok(Message::Binary(_)) => return Err(Closing(CLOSE_MALFORMED, "binary frames are not accepted".into())),
            Ok(_) => continue,
        };
        let chunk: ChunkFrame = serde_json::from_str(&text)
            .map_err(|e| Closing(CLOSE_MALFORMED, format!("malformed chunk: {e}")))?;
        if chunk.v != 1 || chunk.kind != "chunk" {
            return Err(Closing(CLOSE_MALFORMED, format!("expected v1 chunk, got v{} {}", chunk.v, chunk.kind)));
        }
        let n = chunk.data.first().map_or(0, Vec::len);
        if n == 0 || chunk.data.iter().any(|r| r.len() != n) || chunk.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Closing(CLOSE_MALFORMED, "data must be a finite, non-empty channels × samples array".into()));
        }
        if !(chunk.sample_rate > 0.0 && chunk.sample_rate.is_finite()) {
            return Err(Closing(CLOSE_SAMPLE_RATE, format!("invalid sample rate {}", chunk.sample_rate)));
        }
        match sample_rate {
            Some(fs) if fs != chunk.sample_rate => {
                return Err(Closing(CLOSE_SAMPLE_RATE, format!("sample rate changed from {fs} to {}", chunk.sample_rate)));
            }
            _ => sample_rate = Some(chunk.sample_rate),
        }
        let fs = chunk.sample_rate;
        let model = state.model().ok_or(Closing(CLOSE_NO_MODEL, "no intent model is loaded".into()))?;
        let expected = state.expected_channels(&model, fs);
        if expected != Some(chunk.data.len()) {
            return Err(Closing(
                CLOSE_CHANNELS,
                format!("expected {} channels, got {}", expected.map_or("?".into(), |c| c.to_string()), chunk.data.len()),
            ));
        }
        if buffer.is_empty() {
            buffer = vec![Vec::new(); chunk.data.len()];
        }
        for (row, part) in buffer.iter_mut().zip(chunk.data) {
            row.extend(part);
        }

        let need = state.cfg.pipeline.window_samples(fs);
        if buffer[0].len() < need {
            continue;
        }
        let window: Vec<Vec<f64>> = buffer.iter_mut().map(|row| row.drain(..need).collect()).collect();
        buffer.clear();
        if let Err(e) = slot.recorder.lock().await.session().can_start_round() {
            if inactive(&e) {
                return Err(Closing(CLOSE_INACTIVE, e.to_string()));
            }
            if !send(socket, &StreamReply::WindowSkipped { v: 1, reason: e.to_string() }).await {
                return Ok(());
            }
            continue;
        }
        let rec = rows_to_recording(fs, None, window).map_err(|e| Closing(CLOSE_MALFORMED, e))?;
        let round = match state.predict_window(rec).await {
            Ok(prediction) => state.run_round(slot, prediction).await,
            Err(e) => Err(e),
        };
        let sent = match round {
            Ok(round) => send(socket, &StreamReply::CandidatesReady { v: 1, round: &round }).await,
            Err(e) if e.status.is_server_error() => return Err(Closing(CLOSE_INTERNAL, e.body.message)),
            Err(e) => send(socket, &StreamReply::WindowSkipped { v: 1, reason: e.body.message }).await,
        };
        if !sent {
            return Ok(());
        }
    }
    Ok(())
}
