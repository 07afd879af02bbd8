use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use dsearch_core::augment::AugmentError;
use dsearch_core::index::IndexError;
use dsearch_core::ingest::IngestError;
use dsearch_core::profiler::{ProfileError, TableError};
use dsearch_core::search::SearchError;

/// JSON error envelope returned by every endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
    pub retry_after_secs: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                details: Value::Null,
            },
            retry_after_secs: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = details;
        self
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "NotFound",
            format!("no dataset with id '{id}'"),
        )
        .with_details(json!({ "id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut resp = (self.status, Json(self.body)).into_response();
        if let Some(secs) = self.retry_after_secs {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        resp
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        let details = match &e {
            SearchError::UnknownNamedArea(name) => json!({ "area": name }),
            _ => Value::Null,
        };
        ApiError::bad_request(e.code(), e.to_string()).with_details(details)
    }
}

impl From<TableError> for ApiError {
    fn from(e: TableError) -> Self {
        let details = match &e {
            TableError::RaggedRows {
                column,
                expected,
                found,
            } => {
                json!({ "column": column, "expected": expected, "found": found })
            }
            _ => Value::Null,
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
            .with_details(details)
    }
}

impl From<ProfileError> for ApiError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Table(t) => t.into(),
            other => {
                let details = match &other {
                    ProfileError::UnknownOverrideColumn(c)
                    | ProfileError::UnpairedSpatialOverride(c) => {
                        json!({ "column": c })
                    }
                    ProfileError::OverrideUnparseable { column, ty } => {
                        json!({ "column": column, "type": ty })
                    }
                    _ => Value::Null,
                };
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    other.code(),
                    other.to_string(),
                )
                .with_details(details)
            }
        }
    }
}

impl From<AugmentError> for ApiError {
    fn from(e: AugmentError) -> Self {
        let details = match &e {
            AugmentError::UnknownColumn { side, column } => {
                json!({ "side": side, "column": column })
            }
            AugmentError::IncompatiblePairKinds {
                left,
                right,
                left_type,
                right_type,
                kind,
            } => {
                json!({ "left": left, "right": right, "left_type": left_type, "right_type": right_type, "kind": kind })
            }
            AugmentError::AggregationOnNonNumeric {
                column,
                agg,
                column_type,
            } => {
                json!({ "column": column, "agg": agg, "column_type": column_type })
            }
            AugmentError::MissingAggregation(c) | AugmentError::MissingLongitude(c) => {
                json!({ "column": c })
            }
            _ => Value::Null,
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
            .with_details(details)
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let (status, details, retry) = match &e {
            IngestError::PluginUnavailable {
                plugin,
                retry_after_secs,
                ..
            } => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({ "plugin": plugin, "retry_after_secs": retry_after_secs }),
                *retry_after_secs,
            ),
            IngestError::SourceGone(locator) => {
                (StatusCode::GONE, json!({ "locator": locator }), None)
            }
            IngestError::HashMismatch {
                locator,
                expected,
                found,
            } => (
                StatusCode::BAD_GATEWAY,
                json!({ "locator": locator, "expected": expected, "found": found }),
                None,
            ),
            IngestError::MalformedListing { plugin, .. } => {
                (StatusCode::BAD_GATEWAY, json!({ "plugin": plugin }), None)
            }
            IngestError::Table(_) => (StatusCode::UNPROCESSABLE_ENTITY, Value::Null, None),
            IngestError::UnknownPlugin(_) | IngestError::Cache(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, Value::Null, None)
            }
        };
        let mut err = ApiError::new(status, e.code(), e.to_string()).with_details(details);
        err.retry_after_secs = retry;
        err
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "IndexError",
            e.to_string(),
        )
    }
}
