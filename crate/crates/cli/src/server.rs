//! JSON-over-HTTP service around one loaded model.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;
use tower_http::cors::CorsLayer;
use vr_rating::api::{self, ApiError};
use vr_rating::OrdinalModel;

/// The served model and the file it is reloaded from. Handlers clone the
/// inner `Arc` once per request, so a reload never splits a request across
/// two models.
pub struct AppState {
    model: RwLock<Arc<OrdinalModel>>,
    path: Option<PathBuf>,
}

impl AppState {
    pub fn new(model: OrdinalModel, path: Option<PathBuf>) -> Self {
        Self { model: RwLock::new(Arc::new(model)), path }
    }

    pub fn load(path: PathBuf) -> vr_rating::Result<Self> {
        Ok(Self::new(OrdinalModel::load(&path)?, Some(path)))
    }

    pub fn model(&self) -> Arc<OrdinalModel> {
        Arc::clone(&self.model.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Loads the model file again and swaps it in. On failure the current
    /// model stays.
    pub fn reload(&self) -> Result<(), String> {
        let path = self.path.as_ref().ok_or("service was not started from a model file")?;
        let model = OrdinalModel::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(model);
        log::info!("reloaded model from {}", path.display());
        Ok(())
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = match e {
        ApiError::UnknownFeature(name) => json!({ "error": e.to_string(), "feature": name }),
        _ => json!({ "error": e.to_string() }),
    };
    json_response(status, body.to_string())
}

fn respond(result: Result<String, ApiError>) -> Response {
    match result {
        Ok(body) => json_response(StatusCode::OK, body),
        Err(e) => error_response(&e),
    }
}

fn with_body(
    state: &AppState,
    body: &[u8],
    f: impl FnOnce(&OrdinalModel, &str) -> Result<String, ApiError>,
) -> Response {
    let text = match std::str::from_utf8(body) {
        Ok(t) => t,
        Err(e) => return error_response(&ApiError::Malformed(e.to_string())),
    };
    respond(f(&state.model(), text))
}

async fn schema(State(state): State<Arc<AppState>>) -> Response {
    respond(api::schema_json(&state.model()))
}

async fn rate(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    with_body(&state, &body, api::rate_json)
}

async fn explain(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    with_body(&state, &body, api::explain_json)
}

async fn suggest(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    with_body(&state, &body, api::suggest_json)
}

async fn whatif(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    with_body(&state, &body, api::whatif_json)
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    match state.reload() {
        Ok(()) => json_response(StatusCode::OK, json!({ "reloaded": true }).to_string()),
        Err(e) => error_response(&ApiError::Internal(e)),
    }
}

async fn not_found() -> Response {
    json_response(StatusCode::NOT_FOUND, json!({ "error": "not found" }).to_string())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/schema", get(schema))
        .route("/v1/rate", post(rate))
        .route("/v1/explain", post(explain))
        .route("/v1/suggest", post(suggest))
        .route("/v1/whatif", post(whatif))
        .route("/v1/reload", post(reload))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// `PORT` in the environment replaces the port of `bind`.
pub fn resolve_bind(bind: SocketAddr, port_var: Option<&str>) -> Result<SocketAddr, String> {
    match port_var {
        None => Ok(bind),
        Some(p) => {
            let port = p.trim().parse::<u16>().map_err(|_| format!("PORT is not a port number: {p:?}"))?;
            Ok(SocketAddr::new(bind.ip(), port))
        }
    }
}

#[cfg(unix)]
fn reload_on_sighup(state: Arc<AppState>) {
    use tokio::signal::unix::{signal, SignalKind};
    tokio::spawn(async move {
        let mut hangups = match signal(SignalKind::hangup()) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("SIGHUP reload unavailable: {e}");
                return;
            }
        };
        while hangups.recv().await.is_some() {
            if let Err(e) = state.reload() {
                log::error!("reload failed, keeping the current model: {e}");
            }
        }
    });
}

#[cfg(not(unix))]
fn reload_on_sighup(_state: Arc<AppState>) {}

pub async fn serve(state: Arc<AppState>, bind: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    reload_on_sighup(Arc::clone(&state));
    axum::serve(listener, router(state)).await
}
