use std::net::SocketAddr;
use std::path::PathBuf;

use mentalgen_core::classifier::TrainConfig;
use mentalgen_core::pipeline::PipelineConfig;
use mentalgen_session::gateway::RemoteConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A configuration problem, with the 1-based line it was found on when the
/// source was a file.
#[derive(Debug, Error, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayMode {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub remote: RemoteConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { mode: GatewayMode::Mock, remote: RemoteConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub listen: String,
    /// Holds `sessions/`, `images/` and `models/`.
    pub data_dir: PathBuf,
    pub min_rounds: usize,
    /// Deadline for one round's generation batch.
    pub generation_timeout_s: f64,
    /// Model to load at startup; defaults to `models/model.json` if present.
    pub model: Option<PathBuf>,
    pub gateway: GatewayConfig,
    pub training: TrainConfig,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("mentalgen-data"),
            min_rounds: 8,
            generation_timeout_s: 120.0,
            model: None,
            gateway: GatewayConfig::default(),
            training: TrainConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

/// Environment variables that override file settings.
pub const ENV_OVERRIDES: [&str; 7] = [
    "MENTALGEN_LISTEN",
    "MENTALGEN_DATA_DIR",
    "MENTALGEN_MIN_ROUNDS",
    "MENTALGEN_GATEWAY_MODE",
    "MENTALGEN_REMOTE_URL",
    "MENTALGEN_REMOTE_TIMEOUT_S",
    "MENTALGEN_MODEL",
];

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = ...` assignment, for semantic errors.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_at(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate().map_err(|(key, message)| ConfigError { line: line_of_key(text, key), message })?;
        Ok(cfg)
    }

    /// Applies `MENTALGEN_*` overrides from `lookup` and revalidates.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let env_err = |var: &str, msg: String| ConfigError { line: None, message: format!("{var}: {msg}") };
        if let Some(v) = lookup("MENTALGEN_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = lookup("MENTALGEN_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup("MENTALGEN_MIN_ROUNDS") {
            self.min_rounds = v.parse().map_err(|e| env_err("MENTALGEN_MIN_ROUNDS", format!("{e}")))?;
        }
        if let Some(v) = lookup("MENTALGEN_GATEWAY_MODE") {
            self.gateway.mode = match v.as_str() {
                "mock" => GatewayMode::Mock,
                "remote" => GatewayMode::Remote,
                other => return Err(env_err("MENTALGEN_GATEWAY_MODE", format!("unknown mode `{other}`"))),
            };
        }
        if let Some(v) = lookup("MENTALGEN_REMOTE_URL") {
            self.gateway.remote.url = v;
        }
        if let Some(v) = lookup("MENTALGEN_REMOTE_TIMEOUT_S") {
            self.gateway.remote.timeout_s = v.parse().map_err(|e| env_err("MENTALGEN_REMOTE_TIMEOUT_S", format!("{e}")))?;
        }
        if let Some(v) = lookup("MENTALGEN_MODEL") {
            self.model = Some(v.into());
        }
        self.validate().map_err(|(key, message)| ConfigError { line: None, message: format!("{key}: {message}") })
    }

    pub fn listen_addr(&self) -> SocketAddr {
        self.listen.parse().expect("validated listen address")
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if let Err(e) = self.listen.parse::<SocketAddr>() {
            return Err(("listen", format!("invalid listen address `{}`: {e}", self.listen)));
        }
        if self.data_dir.as_os_str().is_empty() {
            return Err(("data_dir", "data_dir must not be empty".into()));
        }
        if self.min_rounds == 0 {
            return Err(("min_rounds", "min_rounds must be at least 1".into()));
        }
        if !(self.generation_timeout_s > 0.0 && self.generation_timeout_s.is_finite()) {
            return Err(("generation_timeout_s", format!("must be positive, got {}", self.generation_timeout_s)));
        }
        let remote = &self.gateway.remote;
        if self.gateway.mode == GatewayMode::Remote && !(remote.url.starts_with("ws://") || remote.url.starts_with("wss://")) {
            return Err(("url", format!("remote url must be ws:// or wss://, got `{}`", remote.url)));
        }
        if !(remote.timeout_s > 0.0 && remote.timeout_s.is_finite()) {
            return Err(("timeout_s", format!("must be positive, got {}", remote.timeout_s)));
        }
        if self.training.folds < 2 {
            return Err(("folds", format!("need at least 2 folds, got {}", self.training.folds)));
        }
        if !(self.training.c > 0.0 && self.training.c.is_finite()) {
            return Err(("c", format!("must be positive, got {}", self.training.c)));
        }
        let p = &self.pipeline;
        if !(p.window_s > 0.0 && p.overlap_s >= 0.0 && p.overlap_s < p.window_s) {
            return Err(("window_s", format!("need 0 <= overlap_s < window_s, got {} and {}", p.overlap_s, p.window_s)));
        }
        Ok(())
    }
}
