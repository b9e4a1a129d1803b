//! Generation backends: a deterministic procedural mock and a WebSocket
//! client for a remote image-generation workflow service.

mod mock;
mod remote;
mod stub;
pub mod wire;

pub use mock::{render_base_image, MockGenerator, MockParams};
pub use remote::{RemoteConfig, RemoteGenerator, DEFAULT_TIMEOUT};
pub use stub::{StubMode, StubServer};

use async_trait::async_trait;

use crate::types::{GenerationRequest, GenerationResult};

#[async_trait]
pub trait Generator: Send + Sync {
    /// One result per request, matched by `request_id`, in request order.
    async fn generate_batch(&self, requests: &[GenerationRequest]) -> Vec<GenerationResult>;

    async fn generate(&self, request: &GenerationRequest) -> GenerationResult {
        self.generate_batch(std::slice::from_ref(request))
            .await
            .pop()
            .expect("one result per request")
    }
}
