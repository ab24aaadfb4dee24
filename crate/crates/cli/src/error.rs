use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use thiserror::Error;

use patchwarp::dataset::DatasetError;
use patchwarp::geometry::GeometryError;
use patchwarp::metrics::MetricsError;
use patchwarp::pipeline::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    SampleNotFound,
    CadNotFound,
    RouteNotFound,
    InvalidArgument,
    Dataset,
    Io,
    Render,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::SampleNotFound | ErrorKind::CadNotFound => 2,
            ErrorKind::InvalidArgument => 3,
            ErrorKind::Dataset => 4,
            ErrorKind::Io => 5,
            ErrorKind::RouteNotFound | ErrorKind::Render => 1,
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            ErrorKind::SampleNotFound | ErrorKind::CadNotFound | ErrorKind::RouteNotFound => StatusCode::NOT_FOUND,
            ErrorKind::InvalidArgument => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error reported as `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug, Clone, Error, Serialize)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::InvalidArgument, message)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self })
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        Self::new(ErrorKind::Dataset, e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(e) => e.into(),
            e => Self::new(ErrorKind::Render, e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io(e) => e.into(),
            e => Self::invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        match e {
            image::ImageError::IoError(e) => e.into(),
            e => Self::new(ErrorKind::Render, e.to_string()),
        }
    }
}

impl IntoResponse for CliError {
    fn into_response(self) -> Response {
        (self.kind.status(), axum::Json(self.to_json())).into_response()
    }
}
