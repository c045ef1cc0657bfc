//! Routes and JSON plumbing. Handlers hand the blocking session work
//! (which fsyncs) to the blocking thread pool.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::session::{CreateSession, Event, Mode, SessionHeader, Sessions};
use crate::ServiceError;

type AppState = Arc<Sessions>;

#[derive(Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid JSON body: {e}")))
}

async fn blocking<T, F>(state: AppState, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Sessions) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

async fn list_maps(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.maps())
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CreateSession = parse_body(&body)?;
    let created = blocking(state, move |s| s.create(req)).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

#[derive(Deserialize)]
struct ActionBody {
    action: String,
}

async fn post_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let req: ActionBody = parse_body(&body)?;
    let payload = blocking(state, move |s| s.act(&id, &req.action)).await?;
    Ok(Json(payload).into_response())
}

#[derive(Deserialize)]
struct RatingBody {
    score: f64,
}

async fn post_rating(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let req: RatingBody = parse_body(&body)?;
    let ack = blocking(state, move |s| s.rate(&id, req.score)).await?;
    Ok(Json(ack).into_response())
}

#[derive(Deserialize)]
struct ExplanationBody {
    text: String,
}

async fn post_explanation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let req: ExplanationBody = parse_body(&body)?;
    let ack = blocking(state, move |s| s.explain(&id, &req.text)).await?;
    Ok(Json(ack).into_response())
}

async fn get_view(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let payload = blocking(state, move |s| s.view(&id)).await?;
    Ok(Json(payload).into_response())
}

fn admin_token(headers: &HeaderMap) -> Option<&str> {
    if let Some(v) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        return v.strip_prefix("Bearer ");
    }
    headers.get("x-admin-token").and_then(|v| v.to_str().ok())
}

#[derive(Serialize)]
struct SessionLogBody {
    header: SessionHeader,
    events: Vec<Event>,
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    state.check_admin(admin_token(&headers))?;
    let (header, events) = blocking(state, move |s| s.log(&id)).await?;
    Ok(Json(SessionLogBody { header, events }).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    mode: Option<String>,
}

async fn export(
    State(state): State<AppState>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    state.check_admin(admin_token(&headers))?;
    let mode = match q.mode.as_deref() {
        None | Some("") => None,
        Some(m) => Some(
            serde_json::from_value::<Mode>(serde_json::Value::String(m.to_ascii_lowercase()))
                .map_err(|_| ServiceError::Unprocessable(format!("unknown mode `{m}`")))?,
        ),
    };
    let entries = blocking(state, move |s| Ok(s.export(mode))).await?;
    let mut body = Vec::new();
    wayfinder_core::analysis::write_corpus(&mut body, &entries)
        .map_err(|e| ServiceError::Storage(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn api_not_found() -> ServiceError {
    ServiceError::NotFound("no such endpoint".into())
}

/// Explanation bodies are capped well above the 2000-character limit so
/// oversized text gets a proper 413 from the session layer.
const BODY_LIMIT: usize = 256 * 1024;

pub fn router(sessions: Arc<Sessions>) -> Router {
    let api = Router::new()
        .route("/maps", get(list_maps))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/view", get(get_view))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/rating", post(post_rating))
        .route("/sessions/{id}/explanation", post(post_explanation))
        .route("/export", get(export))
        .fallback(api_not_found);
    let static_dir = sessions.config().static_dir.clone();
    let app = Router::new()
        .nest("/api", api)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(sessions);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves until interrupted.
pub async fn serve(sessions: Arc<Sessions>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(sessions))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
