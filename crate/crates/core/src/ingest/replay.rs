use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Sender;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::signal::EegRecording;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed {
    /// Wall-clock playback scaled by this factor (1.0 = real time).
    Factor(f64),
    /// Deliver everything immediately.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub speed: Speed,
    pub chunk_s: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { speed: Speed::Factor(1.0), chunk_s: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    /// channels × chunk samples starting at `start_sample`.
    Chunk { index: usize, start_sample: usize, data: Array2<f64> },
    End { chunks: usize },
    Error { message: String },
}

/// Receives events from a single producer thread.
pub trait ChunkSink: Send + 'static {
    /// An `Err` stops the stream; the sink then receives one `Error` event.
    fn deliver(&mut self, event: StreamEvent) -> Result<(), String>;
}

impl<F> ChunkSink for F
where
    F: FnMut(StreamEvent) -> Result<(), String> + Send + 'static,
{
    fn deliver(&mut self, event: StreamEvent) -> Result<(), String> {
        self(event)
    }
}

impl ChunkSink for Sender<StreamEvent> {
    fn deliver(&mut self, event: StreamEvent) -> Result<(), String> {
        self.send(event).map_err(|_| "receiver dropped".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub chunks: usize,
    pub error: Option<String>,
    pub cancelled: bool,
}

pub struct ReplayHandle {
    thread: JoinHandle<ReplayOutcome>,
    stop: Arc<AtomicBool>,
}

impl ReplayHandle {
    pub fn cancel(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }

    pub fn join(self) -> ReplayOutcome {
        self.thread.join().expect("replay thread panicked")
    }
}

/// Streams the recording in fixed chunks on its own thread. Chunk `i` is
/// released at `(i + 1) · chunk_s / speed` seconds after start.
pub fn replay_stream(
    rec: &EegRecording,
    cfg: ReplayConfig,
    mut sink: impl ChunkSink,
) -> Result<ReplayHandle, IngestError> {
    let interval = match cfg.speed {
        Speed::Factor(f) if f > 0.0 && f.is_finite() => Some(cfg.chunk_s / f),
        Speed::Factor(f) => return Err(IngestError::InvalidSpeed(f)),
        Speed::Unbounded => None,
    };
    if !(cfg.chunk_s > 0.0 && cfg.chunk_s.is_finite()) {
        return Err(IngestError::InvalidSpec(format!("chunk_s must be positive, got {}", cfg.chunk_s)));
    }
    let chunk = ((cfg.chunk_s * rec.sample_rate()).round() as usize).max(1);
    let data = rec.data().clone();
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        let start = Instant::now();
        let n = data.ncols();
        let mut index = 0;
        let mut offset = 0;
        while offset < n {
            if flag.load(Ordering::Relaxed) {
                return ReplayOutcome { chunks: index, error: None, cancelled: true };
            }
            if let Some(dt) = interval {
                let due = start + Duration::from_secs_f64(dt * (index + 1) as f64);
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                }
            }
            let end = (offset + chunk).min(n);
            let event = StreamEvent::Chunk { index, start_sample: offset, data: data.slice(s![.., offset..end]).to_owned() };
            if let Err(message) = sink.deliver(event) {
                let _ = sink.deliver(StreamEvent::Error { message: message.clone() });
                return ReplayOutcome { chunks: index, error: Some(message), cancelled: false };
            }
            index += 1;
            offset = end;
        }
        let _ = sink.deliver(StreamEvent::End { chunks: index });
        ReplayOutcome { chunks: index, error: None, cancelled: false }
    });
    Ok(ReplayHandle { thread, stop })
}
