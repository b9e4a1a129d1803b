use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mentalgen_core::pipeline::PipelineError;
use mentalgen_session::SessionError;
use serde::Serialize;

/// JSON error body: `{"error": {"code", "message", "field"?}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code, message: message.into(), field: None } }
    }

    pub fn field(mut self, field: impl Into<String>) -> Self {
        self.body.field = Some(field.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} `{id}` not found"))
    }

    pub fn no_model() -> Self {
        Self::new(StatusCode::CONFLICT, "model_not_trained", "no intent model is loaded; train one first")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let msg = e.to_string();
        match e {
            RatingOutOfRange { candidate, .. } => {
                Self::new(StatusCode::BAD_REQUEST, "rating_out_of_range", msg).field(format!("ratings[{candidate}]"))
            }
            WrongRatingCount { .. } | MissingRatings => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_ratings", msg).field("ratings")
            }
            InvalidCandidate(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_candidate", msg).field("final_mark"),
            UnresolvableImage(_) => {
                Self::new(StatusCode::BAD_REQUEST, "unresolvable_image", msg).field("base_image")
            }
            Finalized(_) => Self::new(StatusCode::CONFLICT, "session_finalized", msg),
            DuplicateSession(_) => Self::new(StatusCode::CONFLICT, "duplicate_session", msg),
            NoOpenRound(_) | RoundInProgress(_) | OutOfOrder(_) => Self::new(StatusCode::CONFLICT, "round_state", msg),
            EmptyHistory => Self::new(StatusCode::CONFLICT, "no_completed_rounds", msg),
            EmptyCorpus(_) | Log(_) => Self::internal(msg),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_window", e.to_string()).field("window")
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
