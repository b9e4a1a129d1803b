use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use base64::Engine as _;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_tungstenite::{accept_async, tungstenite::Message};

use super::mock::encode_png;
use super::wire::{WireBody, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubMode {
    /// Answers each submit with a progress message and a 1×1 PNG.
    Echo,
    /// Accepts submits and never answers.
    Silent,
    /// Answers each submit with a frame that is not a protocol message.
    Malformed,
    /// Answers each submit with an `error` message.
    Error,
}

/// Loopback workflow server for exercising the remote client.
pub struct StubServer {
    addr: SocketAddr,
    connections: Arc<AtomicUsize>,
    task: JoinHandle<()>,
}

impl StubServer {
    pub async fn start(mode: StubMode) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let connections = Arc::new(AtomicUsize::new(0));
        let counter = connections.clone();
        let task = tokio::spawn(async move {
            while let Ok((stream, _)) = listener.accept().await {
                counter.fetch_add(1, Ordering::SeqCst);
                tokio::spawn(async move {
                    let Ok(ws) = accept_async(stream).await else { return };
                    let (mut tx, mut rx) = ws.split();
                    while let Some(Ok(frame)) = rx.next().await {
                        let Message::Text(text) = frame else { continue };
                        let Ok(msg) = WireMessage::parse(&text) else { continue };
                        let replies = match mode {
                            StubMode::Silent => vec![],
                            StubMode::Malformed => vec!["{\"v\":1,\"type\":".to_string()],
                            StubMode::Error => {
                                vec![WireMessage::new(&msg.request_id, WireBody::Error { message: "workflow failed".into() }).to_text()]
                            }
                            StubMode::Echo => vec![
                                WireMessage::new(&msg.request_id, WireBody::Progress { fraction: 0.5 }).to_text(),
                                WireMessage::new(
                                    &msg.request_id,
                                    WireBody::Result {
                                        mime: "image/png".into(),
                                        image_base64: base64::engine::general_purpose::STANDARD.encode(encode_png(1, 1, &[255, 255, 255])),
                                    },
                                )
                                .to_text(),
                            ],
                        };
                        for r in replies {
                            if tx.send(Message::text(r)).await.is_err() {
                                return;
                            }
                        }
                    }
                });
            }
        });
        Ok(Self { addr, connections, task })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    /// TCP connections accepted so far.
    pub fn connections(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}
