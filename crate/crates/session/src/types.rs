use std::fmt;
use std::str::FromStr;

use mentalgen_core::signal::CommandLabel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Content address of an image: `sha256:<hex digest of the bytes>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageRef(String);

impl ImageRef {
    pub fn for_bytes(bytes: &[u8]) -> Self {
        Self(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
    }

    pub fn digest(&self) -> &str {
        &self.0["sha256:".len()..]
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ImageRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix("sha256:").unwrap_or(s);
        if hex.len() == 64 && hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            Ok(Self(format!("sha256:{hex}")))
        } else {
            Err(format!("`{s}` is not a sha256 image reference"))
        }
    }
}

impl TryFrom<String> for ImageRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ImageRef> for String {
    fn from(r: ImageRef) -> Self {
        r.0
    }
}

/// Structure-preservation flags forwarded to the generation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    pub edge_guided: bool,
    pub line_guided: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Self { edge_guided: true, line_guided: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRequest {
    pub request_id: String,
    pub base_image: ImageRef,
    pub command: CommandLabel,
    pub model_weight: f64,
    pub prompt_tokens: Vec<String>,
    pub constraints: Constraints,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    Failed,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Could not open a connection, even after the retry.
    Connect,
    /// The backend sent something that is not a valid protocol message.
    Malformed,
    /// The backend reported an error for this request.
    Remote,
    /// The connection closed before a result arrived.
    Disconnected,
    /// Returned image bytes could not be stored.
    Storage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationResult {
    pub request_id: String,
    /// Present exactly when `status` is `ok`.
    pub image: Option<ImageRef>,
    pub status: GenerationStatus,
    pub failure: Option<FailureKind>,
    pub message: Option<String>,
    pub latency_ms: u64,
    /// Connection attempts made for the batch this request was part of.
    pub attempts: u32,
}

impl GenerationResult {
    pub fn ok(request_id: &str, image: ImageRef, latency_ms: u64, attempts: u32) -> Self {
        Self {
            request_id: request_id.into(),
            image: Some(image),
            status: GenerationStatus::Ok,
            failure: None,
            message: None,
            latency_ms,
            attempts,
        }
    }

    pub fn failed(request_id: &str, kind: FailureKind, message: impl Into<String>, latency_ms: u64, attempts: u32) -> Self {
        Self {
            request_id: request_id.into(),
            image: None,
            status: GenerationStatus::Failed,
            failure: Some(kind),
            message: Some(message.into()),
            latency_ms,
            attempts,
        }
    }

    pub fn timeout(request_id: &str, latency_ms: u64, attempts: u32) -> Self {
        Self {
            request_id: request_id.into(),
            image: None,
            status: GenerationStatus::Timeout,
            failure: None,
            message: None,
            latency_ms,
            attempts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Predicted,
    Perturbed,
}

/// One of the five images shown in a round. `image` is `None` when its
/// generation failed; the slot is still shown and rated as a placeholder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateImage {
    pub id: usize,
    pub request_id: String,
    pub image: Option<ImageRef>,
    pub status: GenerationStatus,
    pub prompt_tokens: Vec<String>,
    pub model_weight: f64,
    pub provenance: Provenance,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_ref_parses_and_round_trips() {
        let r = ImageRef::for_bytes(b"abc");
        assert_eq!(r.digest().len(), 64);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ImageRef>(&json).unwrap(), r);
        assert_eq!(r.digest().parse::<ImageRef>().unwrap(), r);
        assert!("sha256:xyz".parse::<ImageRef>().is_err());
        assert!(serde_json::from_str::<ImageRef>("\"../../etc/passwd\"").is_err());
    }
}
