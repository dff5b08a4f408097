use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde_json::json;

use arsimplify_core::calibration::CalibrationError;
use arsimplify_core::classifier::ClassifierError;
use arsimplify_core::generation::GenerationError;
use arsimplify_core::pipeline::PipelineError;
use arsimplify_core::store::StoreError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_payload", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": self.code, "message": self.message})),
        )
            .into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::NotFound(_) | StoreError::VersionNotFound { .. } => Self::not_found(msg),
            StoreError::ConcurrentUpdateConflict { .. } | StoreError::AlreadyExists(_) => {
                Self::new(StatusCode::CONFLICT, "version_conflict", msg)
            }
            StoreError::Invalid(_) | StoreError::InvalidId(_) | StoreError::InvalidGold(_) => {
                Self::unprocessable(msg)
            }
            StoreError::Io(_) | StoreError::Corrupt { .. } => Self::internal(msg),
        }
    }
}

impl From<ClassifierError> for ApiError {
    fn from(e: ClassifierError) -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "classifier_unavailable",
            e.to_string(),
        )
    }
}

impl From<CalibrationError> for ApiError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Classifier(c) => c.into(),
            CalibrationError::EmptyDataset | CalibrationError::InvalidSample { .. } => {
                Self::unprocessable(e.to_string())
            }
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Generation(GenerationError::Backend(b)) => Self::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "backend_unavailable",
                b.to_string(),
            ),
            PipelineError::Generation(g) => Self::internal(g.to_string()),
            PipelineError::Classifier(c) => c.into(),
            PipelineError::Calibration(c) => c.into(),
        }
    }
}

/// JSON body extractor whose rejections are 422 with a JSON error body.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(r) => Err(rejection(r)),
        }
    }
}

fn rejection(r: JsonRejection) -> ApiError {
    ApiError::unprocessable(r.body_text())
}
