//! Read-only inference service.
//!
//! - `GET /health` reports whether models are loaded and their versions.
//! - `POST /predict` takes `{"text": "...", "comments": ["..."]}` and returns
//!   a [`Prediction`]. Errors are `{"error": {"code", "message"}}`.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{error, info};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use reactmine::pipeline::{Prediction, Predictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub kind: String,
    pub classes: usize,
    pub format_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub cnn: NetworkInfo,
    pub rnn: NetworkInfo,
    /// Feature set of the regression, if one is loaded.
    pub ensemble: Option<String>,
    pub fallback: bool,
    pub lexicon_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    /// `ok`, or `unavailable` when no models are loaded.
    pub status: String,
    pub models: Option<ModelVersions>,
}

#[derive(Debug, Deserialize)]
struct PredictRequest {
    text: Option<String>,
    #[serde(default)]
    comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ApiError,
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = ErrorBody {
        error: ApiError {
            code: code.into(),
            message: message.into(),
        },
    };
    (status, Json(body)).into_response()
}

pub struct AppState {
    predictor: Option<Arc<Predictor>>,
    health: Health,
}

impl AppState {
    pub fn new(predictor: Option<Predictor>) -> Self {
        let models = predictor.as_ref().map(|p| {
            let info = |m: &reactmine::models::TrainedModel| NetworkInfo {
                kind: m.architecture.kind().name().into(),
                classes: m.architecture.classes(),
                format_version: 1,
            };
            ModelVersions {
                cnn: info(&p.cnn),
                rnn: info(&p.rnn),
                ensemble: p.ensemble.as_ref().map(|e| e.features.to_string()),
                fallback: p.fallback.is_some(),
                lexicon_words: p.lexicon.len(),
            }
        });
        AppState {
            health: Health {
                status: if models.is_some() { "ok" } else { "unavailable" }.into(),
                models,
            },
            predictor: predictor.map(Arc::new),
        }
    }

    /// Loads artifacts, logging and continuing without models on failure so
    /// the service can still answer health checks.
    pub fn load(dir: &Path) -> Self {
        match Predictor::load(dir) {
            Ok(p) => {
                info!("loaded models from {}", dir.display());
                AppState::new(Some(p))
            }
            Err(e) => {
                error!("models not loaded from {}: {e}", dir.display());
                AppState::new(None)
            }
        }
    }
}

/// CORS for the given origin; `*` or none allows any origin.
pub fn cors_layer(origin: Option<&str>) -> anyhow::Result<CorsLayer> {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    Ok(match origin {
        None | Some("*") => layer.allow_origin(Any),
        Some(o) => layer.allow_origin(HeaderValue::from_str(o)?),
    })
}

pub fn router(state: AppState, cors: CorsLayer) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .layer(cors)
        .with_state(Arc::new(state))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(state.health.clone())
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: PredictRequest = if body.iter().all(u8::is_ascii_whitespace) {
        PredictRequest {
            text: None,
            comments: Vec::new(),
        }
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error_response(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()),
        }
    };
    let text = match req.text {
        Some(t) if !t.trim().is_empty() => t,
        _ => return error_response(StatusCode::BAD_REQUEST, "missing_text", "`text` must be a non-empty string"),
    };
    let Some(predictor) = state.predictor.clone() else {
        return error_response(StatusCode::SERVICE_UNAVAILABLE, "model_not_loaded", "no models are loaded");
    };
    let result = tokio::task::spawn_blocking(move || predictor.predict(&text, &req.comments)).await;
    match result {
        Ok(Ok(p)) => Json::<Prediction>(p).into_response(),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "prediction_failed", e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "prediction_failed", e.to_string()),
    }
}

pub async fn serve(app: Router, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
