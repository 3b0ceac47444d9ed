//! Wire errors. Every failure a handler can produce is one row of
//! [`ERROR_TABLE`]; the `From` conversions below are the only way module
//! errors reach the wire.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use hybridsched_core::cloud::{CloudError, Rejection};
use hybridsched_core::platform::{ResultError, SubmitError};
use hybridsched_core::scheduler::SchedError;

/// (code, HTTP status) for every error the API emits.
pub const ERROR_TABLE: &[(&str, u16)] = &[
    ("bad_request", 400),
    ("unauthenticated", 401),
    ("quota_rejected", 403),
    ("vcluster_quota_exceeded", 403),
    ("unknown_user", 404),
    ("unknown_job", 404),
    ("unknown_vcluster", 404),
    ("not_found", 404),
    ("not_finished", 409),
    ("already_terminal", 409),
    ("duplicate_user", 409),
    ("insufficient_capacity", 409),
    ("already_released", 409),
    ("validation_failed", 422),
    ("missing_dataset", 422),
    ("unroutable_kind", 422),
    ("invalid_request", 422),
    ("internal", 500),
    ("unavailable", 503),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub http_status: u16,
    /// Machine-readable cause, e.g. the domain validation error name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ApiError {
    /// Builds an error from a table code. Panics on a code missing from
    /// the table, which the table test rules out.
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        let status = ERROR_TABLE
            .iter()
            .find(|(c, _)| *c == code)
            .unwrap_or_else(|| panic!("error code `{code}` is not in the table"))
            .1;
        ApiError {
            code: code.to_string(),
            message: message.into(),
            http_status: status,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("bad_request", message)
    }

    pub fn unavailable() -> Self {
        Self::new("unavailable", "scheduler is shutting down")
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.http_status, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<SubmitError> for ApiError {
    fn from(e: SubmitError) -> Self {
        let message = e.to_string();
        match e {
            SubmitError::Validation(v) => Self::new("validation_failed", message).with_detail(v.code()),
            SubmitError::UnknownUser(_) => Self::new("unknown_user", message),
            SubmitError::MissingDataset(_) => Self::new("missing_dataset", message),
            SubmitError::Rejected(r) => r.into(),
        }
    }
}

impl From<Rejection> for ApiError {
    fn from(r: Rejection) -> Self {
        let message = r.to_string();
        match r {
            Rejection::ConcurrencyQuota => Self::new("quota_rejected", message).with_detail("ConcurrencyQuota"),
            Rejection::NodeQuota => Self::new("quota_rejected", message).with_detail("NodeQuota"),
            Rejection::UnroutableKind => Self::new("unroutable_kind", message),
        }
    }
}

impl From<ResultError> for ApiError {
    fn from(e: ResultError) -> Self {
        let message = e.to_string();
        match e {
            ResultError::UnknownJob(_) => Self::new("unknown_job", message),
            ResultError::NotFinished { .. } => Self::new("not_finished", message),
        }
    }
}

/// Scheduler errors reachable from the API (cancel). The rest indicate a
/// bug and surface as `internal`.
impl From<SchedError> for ApiError {
    fn from(e: SchedError) -> Self {
        let message = e.to_string();
        match e {
            SchedError::UnknownJob(_) => Self::new("unknown_job", message),
            SchedError::AlreadyTerminal { .. } => Self::new("already_terminal", message),
            _ => Self::new("internal", message),
        }
    }
}

impl From<CloudError> for ApiError {
    fn from(e: CloudError) -> Self {
        let message = e.to_string();
        match e {
            CloudError::DuplicateUser(_) => Self::new("duplicate_user", message),
            CloudError::UnknownUser(_) => Self::new("unknown_user", message),
            CloudError::EmptyUserId | CloudError::ZeroNodes => Self::new("invalid_request", message),
            CloudError::InsufficientCloudCapacity { .. } => Self::new("insufficient_capacity", message),
            CloudError::QuotaExceeded { .. } => Self::new("vcluster_quota_exceeded", message),
            CloudError::UnknownVCluster(_) => Self::new("unknown_vcluster", message),
            CloudError::AlreadyReleased(_) => Self::new("already_released", message),
        }
    }
}
