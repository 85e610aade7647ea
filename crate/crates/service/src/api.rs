//! The `/v1` HTTP API.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::json;

use scengen_core::document::scenario_from_json;

use crate::pipeline::{EditRequest, GenerateRequest, Pipeline, ServiceError};
use crate::render::{png_bytes, render_frame, RenderStyle};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let kind = match &self {
            ServiceError::Validation(_) => "validation",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Interpreter { .. } => "interpreter",
            ServiceError::Unavailable(_) => "unavailable",
            ServiceError::Internal(_) => "internal",
        };
        let mut body = json!({ "error": kind, "message": self.to_string() });
        if let ServiceError::Interpreter { raw_excerpt: Some(raw), .. } = &self {
            body["raw_excerpt"] = json!(raw);
        }
        (status, Json(body)).into_response()
    }
}

fn body<T: DeserializeOwned>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::Validation(e.body_text()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn generate(
    State(p): State<Arc<Pipeline>>,
    payload: Result<Json<GenerateRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let req = body(payload)?;
    let out = blocking(move || p.generate(&req)).await?;
    Ok(Json(out).into_response())
}

async fn edit(
    State(p): State<Arc<Pipeline>>,
    payload: Result<Json<EditRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let req = body(payload)?;
    let out = blocking(move || p.edit(&req)).await?;
    Ok(Json(out).into_response())
}

async fn scenario(State(p): State<Arc<Pipeline>>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let doc = p.document(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

async fn frame(State(p): State<Arc<Pipeline>>, Path((id, t)): Path<(String, String)>) -> Result<Response, ServiceError> {
    let t: usize = t.parse().map_err(|_| ServiceError::Validation(format!("frame index `{t}` is not a number")))?;
    let png = blocking(move || {
        let doc = p.document(&id)?;
        let scenario = scenario_from_json(&doc).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let img = render_frame(&scenario, t, &RenderStyle::default())
            .map_err(|e| ServiceError::Internal(e.to_string()))?
            .ok_or_else(|| ServiceError::NotFound(format!("frame {t} outside 1..={}", scenario.horizon())))?;
        Ok(png_bytes(&img))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn health(State(p): State<Arc<Pipeline>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "offline": p.is_offline(),
        "regions": p.index.len(),
        "model_d": p.model.config().d,
    }))
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/v1/generate", post(generate))
        .route("/v1/edit", post(edit))
        .route("/v1/scenarios/{id}", get(scenario))
        .route("/v1/scenarios/{id}/frames/{t}", get(frame))
        .route("/v1/health", get(health))
        .with_state(pipeline)
}
