//! HTTP binding of the contextual embedding provider protocol.
//!
//! `POST /embed` with `{"id": .., "tokens": [..]}` answers
//! `{"layers", "dim", "token_strings", "values"}` where `values` is nested
//! `[layer][token][dim]`. Failures answer `{"code", "message"}` with a
//! 4xx/5xx status; an unknown document is 404 `not_found`.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use topicbench::ctxembed::{EmbeddingProvider, LayerwiseTokenEmbeddings, ProviderError};

use crate::api::ErrorBody;

/// Responses can be large: 512 tokens × 12 layers × 768 floats as JSON.
const MAX_RESPONSE_BYTES: u64 = 1 << 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub layers: usize,
    pub dim: usize,
    pub token_strings: Vec<String>,
    pub values: Vec<Vec<Vec<f32>>>,
}

impl From<&LayerwiseTokenEmbeddings> for EmbedResponse {
    fn from(e: &LayerwiseTokenEmbeddings) -> Self {
        let values = (0..e.layers)
            .map(|l| (0..e.tokens).map(|t| e.vector(l, t).to_vec()).collect())
            .collect();
        EmbedResponse {
            layers: e.layers,
            dim: e.dim,
            token_strings: e.token_strings.clone(),
            values,
        }
    }
}

impl EmbedResponse {
    pub fn into_embeddings(self) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
        let tokens = self.token_strings.len();
        if self.values.len() != self.layers {
            return Err(ProviderError::Protocol(format!("{} layers declared, {} sent", self.layers, self.values.len())));
        }
        let mut values = Vec::with_capacity(self.layers * tokens * self.dim);
        for (l, layer) in self.values.into_iter().enumerate() {
            if layer.len() != tokens {
                return Err(ProviderError::Protocol(format!("layer {l} has {} tokens, expected {tokens}", layer.len())));
            }
            for (t, v) in layer.into_iter().enumerate() {
                if v.len() != self.dim {
                    return Err(ProviderError::Protocol(format!(
                        "layer {l} token {t} has width {}, expected {}",
                        v.len(),
                        self.dim
                    )));
                }
                values.extend(v);
            }
        }
        Ok(LayerwiseTokenEmbeddings {
            layers: self.layers,
            tokens,
            dim: self.dim,
            values,
            token_strings: self.token_strings,
        })
    }
}

/// Client for a provider behind `base_url`.
pub struct HttpProvider {
    base_url: String,
    layers: usize,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, layers: usize, dim: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            layers,
            dim,
            agent,
        }
    }
}

impl EmbeddingProvider for HttpProvider {
    fn layers(&self) -> usize {
        self.layers
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, doc_id: &str, tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
        let body = serde_json::to_vec(&EmbedRequest {
            id: doc_id.to_string(),
            tokens: tokens.to_vec(),
        })
        .expect("request serializes");
        let mut response = self
            .agent
            .post(format!("{}/embed", self.base_url))
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        let bytes = response
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            let err: ErrorBody = serde_json::from_slice(&bytes).map_err(|_| {
                ProviderError::Protocol(format!("status {status} without an error body"))
            })?;
            return Err(if status == 404 {
                ProviderError::NotFound(doc_id.to_string())
            } else {
                ProviderError::Remote {
                    code: err.code,
                    message: err.message,
                }
            });
        }
        let parsed: EmbedResponse =
            serde_json::from_slice(&bytes).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        parsed.into_embeddings()
    }
}

type SharedProvider = Arc<dyn EmbeddingProvider>;

/// Router serving `provider` over the HTTP binding.
pub fn provider_router(provider: SharedProvider) -> Router {
    Router::new().route("/embed", post(embed)).with_state(provider)
}

async fn embed(State(provider): State<SharedProvider>, body: axum::body::Bytes) -> Response {
    let request: EmbedRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.to_string()),
    };
    let result = tokio::task::spawn_blocking(move || provider.embed(&request.id, &request.tokens)).await;
    match result {
        Ok(Ok(emb)) => Json(EmbedResponse::from(&emb)).into_response(),
        Ok(Err(ProviderError::NotFound(id))) => error(StatusCode::NOT_FOUND, "not_found", format!("no embeddings for document {id:?}")),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, "provider_error", e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

fn error(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(ErrorBody { code: code.into(), message })).into_response()
}
