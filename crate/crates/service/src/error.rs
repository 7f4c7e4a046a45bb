use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ngi_core::catalog::Violation;
use serde_json::json;

use crate::store::StoreError;

/// JSON error body: `{"error": {"code", "message", "violations"?}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub violations: Option<Vec<Violation>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
            violations: None,
        }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn invalid_catalog(violations: Vec<Violation>) -> Self {
        ApiError {
            violations: Some(violations),
            ..Self::bad_request("invalid_catalog", "catalog failed validation")
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn missing_credential() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "invalid_credential", "a credential is required")
    }

    pub fn invalid_credential() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "invalid_credential",
            "credential is not valid for this session",
        )
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "unauthorized", message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn storage(e: StoreError) -> Self {
        tracing::error!(error = %e, "storage failure");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(v) = self.violations {
            error["violations"] = json!(v);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}
