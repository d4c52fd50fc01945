use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use reviewboard_core::alerts::AlertError;
use reviewboard_core::ingest::StoreError;
use reviewboard_core::query::ParseError;

/// Error body returned by every API endpoint: `{status, code, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidInput", message)
    }

    pub fn unauthorized() -> Self {
        Self::from(StoreError::AuthFailed)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::AuthFailed => (StatusCode::UNAUTHORIZED, "AuthFailed"),
            StoreError::InvalidReview(_) => (StatusCode::BAD_REQUEST, "InvalidReview"),
            StoreError::InvalidPaper(_) => (StatusCode::BAD_REQUEST, "MalformedUrl"),
            StoreError::InvalidInput(_) => (StatusCode::BAD_REQUEST, "InvalidInput"),
            StoreError::UnreachablePaper(_) => (StatusCode::UNPROCESSABLE_ENTITY, "UnreachablePaper"),
            StoreError::NotReady { .. } => (StatusCode::CONFLICT, "NotReady"),
            StoreError::UnknownRecord(_) => (StatusCode::NOT_FOUND, "UnknownRecord"),
            StoreError::UnknownPrincipal(_) => (StatusCode::NOT_FOUND, "UnknownPrincipal"),
            StoreError::DuplicateId(_) => (StatusCode::CONFLICT, "DuplicateId"),
            StoreError::TokenInUse => (StatusCode::CONFLICT, "TokenInUse"),
            StoreError::AlreadyRevoked(_) => (StatusCode::CONFLICT, "AlreadyRevoked"),
            StoreError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Storage"),
            StoreError::CorruptLog(_) => (StatusCode::INTERNAL_SERVER_ERROR, "CorruptLog"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "ParseError", e.to_string())
    }
}

impl From<AlertError> for ApiError {
    fn from(e: AlertError) -> Self {
        match e {
            AlertError::Parse(p) => p.into(),
            AlertError::UnknownSubscription(_) => Self::not_found("UnknownSubscription", e.to_string()),
            AlertError::EmptyContact => Self::bad_request(e.to_string()),
            AlertError::Store(s) => s.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
