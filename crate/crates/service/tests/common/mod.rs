#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, OnceLock};

use mentalgen_core::classifier::{train_intent_model, IntentModel, TrainConfig};
use mentalgen_core::ingest::{synth_generate, SynthSpec};
use mentalgen_core::pipeline::{command_training_set, PipelineConfig};
use mentalgen_core::signal::{CommandLabel, EegRecording};
use mentalgen_service::{AppState, ServiceConfig};
use serde_json::{json, Value};

pub const HIGH_SNR_SIGMA: f64 = 20.0;

/// A high-SNR model shared by every test in the binary.
pub fn model() -> &'static IntentModel {
    static MODEL: OnceLock<IntentModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let set = synth_generate(&SynthSpec::commands(12, 6.0, HIGH_SNR_SIGMA, 7)).unwrap();
        let cfg = PipelineConfig::default();
        let ts = command_training_set(&set, &cfg).unwrap();
        let train = TrainConfig { folds: 3, ..TrainConfig::default() };
        train_intent_model(&ts, &train, &cfg.fingerprint()).unwrap()
    })
}

/// A fresh recording of `command`, generated with a seed the model never saw.
pub fn held_out(command: CommandLabel, seconds: f64, seed: u64) -> EegRecording {
    let spec = SynthSpec::commands(1, seconds, HIGH_SNR_SIGMA, seed);
    let set = synth_generate(&spec).unwrap();
    set.segments.into_iter().find(|s| s.label.command() == Some(command)).unwrap().recording
}

pub fn window_json(rec: &EegRecording) -> Value {
    let rows: Vec<Vec<f64>> = rec.data().rows().into_iter().map(|r| r.to_vec()).collect();
    json!({ "sample_rate": rec.sample_rate(), "data": rows })
}

pub fn config(dir: &Path) -> ServiceConfig {
    ServiceConfig { listen: "127.0.0.1:0".into(), data_dir: dir.to_path_buf(), ..ServiceConfig::default() }
}

pub fn install_model(dir: &Path) {
    std::fs::create_dir_all(dir.join("models")).unwrap();
    model().save(&dir.join("models").join("model.json")).unwrap();
}

pub struct Running {
    pub base: String,
    pub ws: String,
    pub state: Arc<AppState>,
    server: tokio::task::JoinHandle<()>,
}

impl Running {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn ws_url(&self, path: &str) -> String {
        format!("{}{path}", self.ws)
    }

    pub fn stop(self) {
        self.server.abort();
    }
}

pub async fn start(cfg: ServiceConfig) -> Running {
    let state = AppState::open(cfg).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let served = state.clone();
    let server = tokio::spawn(async move {
        mentalgen_service::serve(served, listener, std::future::pending()).await.unwrap();
    });
    Running { base: format!("http://{addr}"), ws: format!("ws://{addr}"), state, server }
}

pub async fn post(client: &reqwest::Client, url: &str, body: &Value) -> (u16, Value) {
    let resp = client.post(url).json(body).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap_or(Value::Null))
}

pub async fn get(client: &reqwest::Client, url: &str) -> (u16, Value) {
    let resp = client.get(url).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap_or(Value::Null))
}
