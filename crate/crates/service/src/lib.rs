//! HTTP and WebSocket service around the design-session loop: session
//! lifecycle, background training, live EEG intake and event push.

pub mod config;
pub mod error;
pub mod jobs;
pub mod routes;
pub mod state;
pub mod ws;

use std::future::Future;
use std::sync::Arc;

pub use config::{ConfigError, GatewayConfig, GatewayMode, ServiceConfig, ENV_OVERRIDES};
pub use error::{ApiError, ErrorBody};
pub use jobs::{JobState, JobStatus};
pub use routes::router;
pub use state::{AppState, StartupError};

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve(
    state: Arc<AppState>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Opens the state, binds the configured address, prints the bound address
/// on stdout and serves until Ctrl-C.
pub async fn run(cfg: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let addr = cfg.listen_addr();
    let state = AppState::open(cfg)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on {}", listener.local_addr()?);
    serve(state, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
