use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use sacode_core::analytics::AnalyticsError;
use sacode_core::corpus::CorpusError;
use sacode_core::{ReportError, SessionError, StoreError, TreeError};
use serde::Serialize;

/// Response body: exactly one of `payload` and `error` is present.
#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ApiEnvelope<T> {
    Ok { payload: T },
    Error { error: ErrorBody },
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body: ApiEnvelope<()> = ApiEnvelope::Error {
            error: ErrorBody {
                code: self.code,
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let msg = e.to_string();
        match e {
            SessionError::UnknownItem(_) => ApiError::not_found(msg),
            SessionError::AlreadyFinalized(_)
            | SessionError::NotFinalized(_)
            | SessionError::NothingToUndo(_)
            | SessionError::InProgress(_)
            | SessionError::DuplicateAssignment(_) => ApiError::conflict(msg),
            SessionError::TagNotAllowed { .. }
            | SessionError::EmptyTag
            | SessionError::UnknownCode(_)
            | SessionError::CodeNotInTree(_)
            | SessionError::WrongQuestion { .. } => ApiError::validation(msg),
            _ => ApiError::internal(msg),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::NoSession(_) | StoreError::NoDataset(_) => ApiError::not_found(msg),
            StoreError::SessionExists(_) | StoreError::DatasetExists(_) | StoreError::BundledDataset(_) => {
                ApiError::conflict(msg)
            }
            StoreError::InvalidKey(_) | StoreError::Corpus(_) => ApiError::validation(msg),
            StoreError::Session(s) => s.into(),
            StoreError::Io { .. } | StoreError::Malformed { .. } => ApiError::internal(msg),
        }
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        ApiError::validation(e.to_string())
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let msg = e.to_string();
        match e {
            AnalyticsError::NoOverlap | AnalyticsError::ModeUnavailable { .. } => ApiError::conflict(msg),
            _ => ApiError::validation(msg),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        ApiError::validation(e.to_string())
    }
}

impl From<TreeError> for ApiError {
    fn from(e: TreeError) -> Self {
        ApiError::validation(e.to_string())
    }
}
