use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value as Json_};
use tabchain_core::command::ParseError;
use tabchain_core::pipeline::PipelineError;
use tabchain_core::runtime::CorrectError;
use tabchain_core::TableError;
use thiserror::Error;

/// An error with its HTTP status and JSON body.
#[derive(Debug, Error)]
#[error("{status}: {body}")]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Json_,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": kind, "message": message.into() }),
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("no table with id {id}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn kind(&self) -> &str {
        self.body["error"].as_str().unwrap_or("")
    }
}

impl From<TableError> for ApiError {
    fn from(e: TableError) -> Self {
        let message = e.to_string();
        match e {
            TableError::RaggedRow { line, expected, found } => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": "RaggedRow", "line": line, "expected": expected, "found": found, "message": message }),
            },
            TableError::Utf8Error { offset } => ApiError {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": "Utf8Error", "offset": offset, "message": message }),
            },
            TableError::TooLarge { .. } => Self::new(StatusCode::PAYLOAD_TOO_LARGE, "TooLarge", message),
            _ => Self::new(StatusCode::BAD_REQUEST, "InvalidCsv", message),
        }
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({
                "error": "ParseError",
                "line": e.line,
                "col": e.col,
                "expected": e.expected,
                "found": e.found,
                "message": e.to_string(),
            }),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        let body = match e {
            PipelineError::Parse(p) => return p.into(),
            PipelineError::Ambiguous(CorrectError::AmbiguousColumn {
                command_index,
                name,
                candidates,
            }) => json!({
                "error": "AmbiguousColumn",
                "command_index": command_index,
                "name": name,
                "candidates": candidates,
                "message": message,
            }),
            PipelineError::Invalid(report) => json!({
                "error": "ValidationFailed",
                "issues": report.issues,
                "message": message,
            }),
            PipelineError::Exec(x) => json!({
                "error": "ExecutionError",
                "command_index": x.command_index,
                "cause": x.cause,
                "message": message,
            }),
        };
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
