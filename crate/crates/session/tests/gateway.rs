use std::time::{Duration, Instant};

use async_trait::async_trait;
use mentalgen_core::signal::CommandLabel;
use mentalgen_session::gateway::{Generator, MockGenerator, RemoteConfig, RemoteGenerator, StubMode, StubServer};
use mentalgen_session::{
    ArtifactStore, Constraints, FailureKind, GenerationRequest, GenerationResult, GenerationStatus, ImageRef,
};

fn request(i: usize) -> GenerationRequest {
    GenerationRequest {
        request_id: format!("s-r1-c{i}"),
        base_image: ImageRef::for_bytes(b"base"),
        command: CommandLabel::IncreaseTransparency,
        model_weight: 0.78,
        prompt_tokens: vec!["interior".into(), "glass".into()],
        constraints: Constraints::default(),
        seed: i as u64,
    }
}

fn remote(url: String, timeout_s: f64, store: &ArtifactStore) -> RemoteGenerator {
    let cfg = RemoteConfig { url, timeout_s, retry_delay_ms: 50, ..RemoteConfig::default() };
    RemoteGenerator::new(cfg, store.clone())
}

#[tokio::test]
async fn echo_stub_returns_resolvable_images() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let stub = StubServer::start(StubMode::Echo).await.unwrap();
    let reqs: Vec<_> = (0..5).map(request).collect();
    let results = remote(stub.url(), 10.0, &store).generate_batch(&reqs).await;
    assert_eq!(results.len(), 5);
    for (r, q) in results.iter().zip(&reqs) {
        assert_eq!(r.request_id, q.request_id);
        assert_eq!(r.status, GenerationStatus::Ok);
        assert_eq!(r.attempts, 1);
        assert!(store.contains(r.image.as_ref().unwrap()));
    }
    assert_eq!(stub.connections(), 1);
}

#[tokio::test]
async fn unreachable_endpoint_fails_after_one_retry() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let r = remote(format!("ws://127.0.0.1:{port}"), 10.0, &store).generate(&request(0)).await;
    assert_eq!(r.status, GenerationStatus::Failed);
    assert_eq!(r.failure, Some(FailureKind::Connect));
    assert_eq!(r.attempts, 2);
    assert!(r.image.is_none());
}

#[tokio::test]
async fn silent_server_times_out_without_retry() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let stub = StubServer::start(StubMode::Silent).await.unwrap();
    let started = Instant::now();
    let r = remote(stub.url(), 0.5, &store).generate(&request(0)).await;
    assert_eq!(r.status, GenerationStatus::Timeout);
    assert_eq!(r.attempts, 1);
    assert!(started.elapsed() >= Duration::from_millis(450));
    assert_eq!(stub.connections(), 1);
}

#[tokio::test]
async fn malformed_and_error_replies_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let bad = StubServer::start(StubMode::Malformed).await.unwrap();
    let r = remote(bad.url(), 5.0, &store).generate(&request(0)).await;
    assert_eq!((r.status, r.failure), (GenerationStatus::Failed, Some(FailureKind::Malformed)));
    assert_eq!(bad.connections(), 1);

    let err = StubServer::start(StubMode::Error).await.unwrap();
    let r = remote(err.url(), 5.0, &store).generate(&request(0)).await;
    assert_eq!((r.status, r.failure), (GenerationStatus::Failed, Some(FailureKind::Remote)));
    assert_eq!(r.message.as_deref(), Some("workflow failed"));
}

#[tokio::test]
async fn mock_is_deterministic_and_stored() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let mock = MockGenerator::new(store.clone());
    let a = mock.generate(&request(1)).await;
    let b = mock.generate(&request(1)).await;
    assert_eq!(a, b);
    assert_eq!(a.status, GenerationStatus::Ok);
    assert!(store.contains(a.image.as_ref().unwrap()));
    assert_ne!(mock.generate(&request(2)).await.image, a.image);
}

/// Replays fixed results regardless of backend.
struct Canned(Vec<GenerationResult>);

#[async_trait]
impl Generator for Canned {
    async fn generate_batch(&self, requests: &[GenerationRequest]) -> Vec<GenerationResult> {
        requests
            .iter()
            .map(|r| self.0.iter().find(|c| c.request_id == r.request_id).cloned().unwrap())
            .collect()
    }
}

#[tokio::test]
async fn session_is_backend_agnostic() {
    use mentalgen_core::classifier::Prediction;
    use mentalgen_session::{play_round, DesignSession, PromptCorpus, Recorder, SessionConfig};

    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let mock = MockGenerator::new(store);
    let pred = Prediction { command: CommandLabel::MoreClassicalStyle, confidence: 0.7, decision_values: [0.0, 0.1, 0.9] };
    let corpus = PromptCorpus::default();
    let start = || DesignSession::start_event("s", "p", ImageRef::for_bytes(b"base"), SessionConfig::default());

    let mut a = Recorder::start(start(), None).unwrap();
    let round = play_round(&mut a, pred.clone(), &corpus, &mock, Duration::from_secs(5)).await.unwrap();
    let results = mock.generate_batch(&round.requests).await;

    let mut b = Recorder::start(start(), None).unwrap();
    play_round(&mut b, pred, &corpus, &Canned(results), Duration::from_secs(5)).await.unwrap();
    a.submit_ratings(Some(&[1, 2, 7, 3, 4]), None).unwrap();
    b.submit_ratings(Some(&[1, 2, 7, 3, 4]), None).unwrap();
    assert_eq!(a.session(), b.session());
}
