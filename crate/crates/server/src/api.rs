//! HTTP routes. Every handler runs the blocking service call on the
//! blocking pool.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ledgerseal_core::gas::REPORT_SIZES;
use ledgerseal_core::TxHash;
use serde::Deserialize;
use serde_json::json;

use crate::service::{parse_sizes, Service, ServiceError};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn invalid(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_input",
            message: message.into(),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::Disabled => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            ServiceError::DuplicateUid(_) => StatusCode::CONFLICT,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::TxFailed { .. } | ServiceError::ChainUnavailable(_) => StatusCode::BAD_GATEWAY,
            ServiceError::DecryptionFailed(_)
            | ServiceError::FingerprintMismatch { .. }
            | ServiceError::Storage(_)
            | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(service: &Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
{
    let service = service.clone();
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError::from(ServiceError::Internal(e.to_string())))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct SaveBody {
    uid: String,
    text: String,
}

#[derive(Deserialize)]
struct VerifyBody {
    #[serde(default)]
    text: Option<String>,
}

#[derive(Deserialize)]
struct ReportQuery {
    sizes: Option<String>,
}

async fn save(State(svc): State<Arc<Service>>, body: Result<Json<SaveBody>, JsonRejection>) -> ApiResult<Response> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    let out = blocking(&svc, move |s| s.save_review(&body.uid, body.text.as_bytes())).await?;
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn get_review(State(svc): State<Arc<Service>>, Path(uid): Path<String>) -> ApiResult<Response> {
    let review = blocking(&svc, move |s| s.get_review(&uid)).await?;
    Ok(Json(review).into_response())
}

async fn verify(State(svc): State<Arc<Service>>, Path(uid): Path<String>, body: Bytes) -> ApiResult<Response> {
    let text = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        let parsed: VerifyBody = serde_json::from_slice(&body).map_err(|e| ApiError::invalid(e.to_string()))?;
        parsed.text
    };
    let verdict = blocking(&svc, move |s| s.verify_review(&uid, text.as_deref().map(str::as_bytes))).await?;
    Ok(Json(verdict).into_response())
}

async fn transaction(State(svc): State<Arc<Service>>, Path(raw): Path<String>) -> ApiResult<Response> {
    let hash: TxHash = raw
        .to_ascii_lowercase()
        .parse()
        .map_err(|_| ApiError::invalid(format!("{raw:?} is not a 0x-prefixed 32-byte hash")))?;
    let view = blocking(&svc, move |s| s.transaction(&hash)).await?;
    Ok(Json(view).into_response())
}

async fn gas_report(State(svc): State<Arc<Service>>, q: Result<Query<ReportQuery>, QueryRejection>) -> ApiResult<Response> {
    let Query(q) = q.map_err(|e| ApiError::invalid(e.body_text()))?;
    let sizes = match q.sizes {
        Some(raw) => parse_sizes(&raw)?,
        None => REPORT_SIZES.to_vec(),
    };
    let report = svc.gas_report(&sizes)?;
    Ok(Json(report).into_response())
}

async fn health(State(svc): State<Arc<Service>>) -> Json<crate::service::Health> {
    Json(svc.health())
}

async fn fallback() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such route".into(),
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/v1/reviews", post(save))
        .route("/api/v1/reviews/{uid}", get(get_review))
        .route("/api/v1/reviews/{uid}/verify", post(verify))
        .route("/api/v1/transactions/{tx_hash}", get(transaction))
        .route("/api/v1/gas/report", get(gas_report))
        .route("/healthz", get(health))
        .fallback(fallback)
        .with_state(service)
}
