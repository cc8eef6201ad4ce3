//! Review API.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/runs` | run summaries |
//! | GET | `/runs/{id}/explanations` | `?unjudged_by=reviewer` to filter |
//! | GET | `/explanations/{id}` | one explanation record |
//! | POST | `/explanations/{id}/judgments` | 201 with the stored record |
//! | GET | `/runs/{id}/agreement` | `?reviewer=..&complete=true` |
//! | GET | `/runs/{id}/metrics` | the run's `metrics.json` |
//! | GET | `/judgments/{id}` | one judgment record |
//!
//! Errors are `{"code", "message"}` with status 400, 404, 409 or 422.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;

use crate::api::ApiError;
use crate::store::{JudgmentInput, Store};

type Shared = Arc<Store>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}/explanations", get(run_explanations))
        .route("/runs/{id}/agreement", get(agreement))
        .route("/runs/{id}/metrics", get(metrics))
        .route("/explanations/{id}", get(explanation))
        .route("/explanations/{id}/judgments", axum::routing::post(post_judgment))
        .route("/judgments/{id}", get(judgment))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .with_state(store)
}

/// Binds `addr` and serves until the process is interrupted.
pub async fn serve(addr: SocketAddr, store: Store) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn list_runs(State(store): State<Shared>) -> impl IntoResponse {
    Json(store.runs())
}

#[derive(Deserialize)]
struct ExplanationQuery {
    unjudged_by: Option<String>,
}

async fn run_explanations(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ExplanationQuery>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(store.explanations(&id, q.unjudged_by.as_deref())?.into_iter().cloned().collect::<Vec<_>>()))
}

async fn explanation(State(store): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(store.explanation(&id)?.clone()))
}

async fn post_judgment(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<JudgmentInput>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    // existence first, so a bad body for an unknown explanation is a 404
    store.explanation(&id)?;
    let Json(input) = body.map_err(|e| match e {
        JsonRejection::JsonDataError(e) => ApiError::Validation(e.body_text()),
        other => ApiError::BadRequest(other.body_text()),
    })?;
    let record = store.record_judgment(&id, input)?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn judgment(State(store): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(store.judgment(&id)?))
}

#[derive(Deserialize)]
struct AgreementQuery {
    reviewer: Option<String>,
    #[serde(default)]
    complete: bool,
}

async fn agreement(
    State(store): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<AgreementQuery>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(store.agreement(&id, q.reviewer.as_deref(), q.complete)?))
}

async fn metrics(State(store): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(store.metrics(&id)?.clone()))
}
