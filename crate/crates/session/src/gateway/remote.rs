use std::collections::HashMap;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use base64::Engine as _;
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::time::{sleep, timeout_at};
use tokio_tungstenite::{connect_async, tungstenite::Message};

use super::wire::{WireBody, WireMessage};
use super::Generator;
use crate::store::ArtifactStore;
use crate::types::{FailureKind, GenerationRequest, GenerationResult};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    /// `ws://` or `wss://` endpoint.
    pub url: String,
    /// Whole-batch deadline, including connecting.
    pub timeout_s: f64,
    pub workflow_template: String,
    /// Extra connection attempts after a failed connect. Nothing else is retried.
    pub connect_retries: u32,
    pub retry_delay_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: "ws://127.0.0.1:8188/ws".into(),
            timeout_s: DEFAULT_TIMEOUT.as_secs_f64(),
            workflow_template: "interior-edit".into(),
            connect_retries: 1,
            retry_delay_ms: 250,
        }
    }
}

/// Sends a batch over one WebSocket connection and stores returned images.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    cfg: RemoteConfig,
    store: ArtifactStore,
}

impl RemoteGenerator {
    pub fn new(cfg: RemoteConfig, store: ArtifactStore) -> Self {
        Self { cfg, store }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }
}

fn ms_since(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

#[async_trait]
impl Generator for RemoteGenerator {
    async fn generate_batch(&self, requests: &[GenerationRequest]) -> Vec<GenerationResult> {
        let start = Instant::now();
        let deadline = tokio::time::Instant::now() + Duration::from_secs_f64(self.cfg.timeout_s.max(0.0));
        let every = |f: &dyn Fn(&GenerationRequest) -> GenerationResult| requests.iter().map(f).collect::<Vec<_>>();

        let mut attempts = 0u32;
        let ws = loop {
            attempts += 1;
            match timeout_at(deadline, connect_async(self.cfg.url.as_str())).await {
                Ok(Ok((ws, _))) => break ws,
                Ok(Err(e)) if attempts > self.cfg.connect_retries => {
                    let msg = e.to_string();
                    return every(&|r| GenerationResult::failed(&r.request_id, FailureKind::Connect, msg.clone(), ms_since(start), attempts));
                }
                Ok(Err(e)) => {
                    log::warn!("connect to {} failed ({e}); retrying", self.cfg.url);
                    sleep(Duration::from_millis(self.cfg.retry_delay_ms)).await;
                }
                Err(_) => return every(&|r| GenerationResult::timeout(&r.request_id, ms_since(start), attempts)),
            }
        };
        let (mut tx, mut rx) = ws.split();

        let mut results: Vec<Option<GenerationResult>> = vec![None; requests.len()];
        let mut pending: HashMap<&str, usize> = requests.iter().enumerate().map(|(i, r)| (r.request_id.as_str(), i)).collect();
        for req in requests {
            let msg = WireMessage::new(
                &req.request_id,
                WireBody::Submit { workflow_template: self.cfg.workflow_template.clone(), request: req.clone() },
            );
            if let Err(e) = tx.send(Message::text(msg.to_text())).await {
                let msg = e.to_string();
                return every(&|r| GenerationResult::failed(&r.request_id, FailureKind::Disconnected, msg.clone(), ms_since(start), attempts));
            }
        }

        let mut fail_rest: Option<(FailureKind, String)> = None;
        while !pending.is_empty() {
            let frame = match timeout_at(deadline, rx.next()).await {
                Err(_) => break,
                Ok(frame) => frame,
            };
            let text = match frame {
                Some(Ok(Message::Text(t))) => t,
                Some(Ok(Message::Close(_))) | None => {
                    fail_rest = Some((FailureKind::Disconnected, "connection closed before all results".into()));
                    break;
                }
                Some(Err(e)) => {
                    fail_rest = Some((FailureKind::Disconnected, e.to_string()));
                    break;
                }
                Some(Ok(_)) => continue,
            };
            let msg = match WireMessage::parse(&text) {
                Ok(m) => m,
                Err(e) => {
                    fail_rest = Some((FailureKind::Malformed, e));
                    break;
                }
            };
            let Some(&i) = pending.get(msg.request_id.as_str()) else {
                log::warn!("ignoring message for unknown request {}", msg.request_id);
                continue;
            };
            let id = &requests[i].request_id;
            let result = match msg.body {
                WireBody::Progress { .. } => continue,
                WireBody::Result { image_base64, .. } => match base64::engine::general_purpose::STANDARD.decode(image_base64) {
                    Ok(bytes) => match self.store.put(&bytes) {
                        Ok(image) => GenerationResult::ok(id, image, ms_since(start), attempts),
                        Err(e) => GenerationResult::failed(id, FailureKind::Storage, e.to_string(), ms_since(start), attempts),
                    },
                    Err(e) => GenerationResult::failed(id, FailureKind::Malformed, e.to_string(), ms_since(start), attempts),
                },
                WireBody::Error { message } => GenerationResult::failed(id, FailureKind::Remote, message, ms_since(start), attempts),
                WireBody::Submit { .. } => GenerationResult::failed(id, FailureKind::Malformed, "unexpected submit from server", ms_since(start), attempts),
            };
            results[i] = Some(result);
            pending.remove(id.as_str());
        }
        let _ = tx.close().await;

        requests
            .iter()
            .zip(results)
            .map(|(req, r)| {
                r.unwrap_or_else(|| match &fail_rest {
                    Some((kind, msg)) => GenerationResult::failed(&req.request_id, *kind, msg.clone(), ms_since(start), attempts),
                    None => GenerationResult::timeout(&req.request_id, ms_since(start), attempts),
                })
            })
            .collect()
    }
}
