use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tabchain_core::pipeline::QueryResponse;
use tower_http::cors::CorsLayer;

use crate::error::ApiError;
use crate::state::AppState;

type Shared = Arc<AppState>;

#[derive(Deserialize)]
struct UploadParams {
    name: Option<String>,
}

#[derive(Deserialize)]
struct QueryRequest {
    text: String,
}

#[derive(Deserialize)]
struct CommandsRequest {
    chain_text: String,
}

#[derive(Serialize)]
struct ReplyBody {
    #[serde(flatten)]
    response: QueryResponse,
    #[serde(skip_serializing_if = "Option::is_none")]
    table_id: Option<String>,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn upload(State(s): State<Shared>, Query(p): Query<UploadParams>, body: Bytes) -> Result<Response, ApiError> {
    let info = blocking(move || s.upload(&body, p.name.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn table_info(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(s.table(&id)?.info()).into_response())
}

async fn query(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: QueryRequest = parse_json(&body)?;
    let r = blocking(move || s.query(&id, &req.text)).await?;
    Ok(Json(ReplyBody {
        response: r.response,
        table_id: r.table_id,
    })
    .into_response())
}

async fn commands(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: CommandsRequest = parse_json(&body)?;
    let r = blocking(move || s.commands(&id, &req.chain_text)).await?;
    Ok(Json(ReplyBody {
        response: r.response,
        table_id: r.table_id,
    })
    .into_response())
}

async fn history(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(s.history(&id)?).into_response())
}

async fn embedding(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let json = blocking(move || s.embedding(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], json.to_string()).into_response())
}

pub fn router(state: Shared) -> Router {
    let cfg = &state.config().service;
    let limit = cfg.max_upload_bytes;
    let cors = cfg.cors;
    let router = Router::new()
        .route("/health", get(health))
        .route("/tables", post(upload))
        .route("/tables/{id}", get(table_info))
        .route("/tables/{id}/query", post(query))
        .route("/tables/{id}/commands", post(commands))
        .route("/tables/{id}/history", get(history))
        .route("/tables/{id}/embedding", get(embedding))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    if cors {
        router.layer(CorsLayer::permissive())
    } else {
        router
    }
}
