//! HTTP front end for manual review.
//!
//! ```text
//! GET  /runs/{run}/tasks              ?status=&clause=&mode=&page=&page_size=
//! GET  /runs/{run}/tasks/{id}
//! POST /runs/{run}/tasks/{id}/score   {"score": 0-100, "scorer": "..."}
//! GET  /runs/{run}/report
//! ```
//!
//! Everything else is served from the static UI directory.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use anyhow::{Context, Result};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cdmizer_core::review::{ReviewError, ReviewSession, TaskFilter, TaskStatus, DEFAULT_PAGE_SIZE};
use cdmizer_core::run::RunDir;
use cdmizer_core::{ClauseKind, Mode};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

const PLACEHOLDER_INDEX: &str = "<!doctype html>\n<title>cdmizer review</title>\n\
<p>No review UI directory configured. The JSON API is available under <code>/runs/&lt;run&gt;/tasks</code>.</p>\n";

pub struct AppState {
    output_dir: PathBuf,
    token: Option<String>,
    sessions: RwLock<HashMap<String, Arc<RwLock<ReviewSession>>>>,
}

impl AppState {
    pub fn new(output_dir: PathBuf, token: Option<String>) -> Self {
        Self { output_dir, token, sessions: RwLock::new(HashMap::new()) }
    }

    fn session(&self, run: &str) -> Result<Arc<RwLock<ReviewSession>>, ApiError> {
        if let Some(s) = self.sessions.read().unwrap().get(run) {
            return Ok(s.clone());
        }
        if run.is_empty() || run.contains(['/', '\\']) || run.starts_with('.') {
            return Err(ApiError::not_found(format!("run `{run}` not found")));
        }
        let dir = RunDir::open(&self.output_dir, run).map_err(|e| ApiError::not_found(e.to_string()))?;
        let session = ReviewSession::open_run(dir).map_err(ApiError::from)?;
        let mut sessions = self.sessions.write().unwrap();
        Ok(sessions.entry(run.to_string()).or_insert_with(|| Arc::new(RwLock::new(session))).clone())
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(message: String) -> Self {
        Self { status: StatusCode::NOT_FOUND, message }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        use cdmizer_core::evaluator::StoreError;
        let status = match &e {
            ReviewError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ReviewError::BadTaskId(_) => StatusCode::BAD_REQUEST,
            ReviewError::Store(StoreError::OutOfRange { .. } | StoreError::ReservedScorer(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ReviewError::Store(StoreError::UnknownTask(_)) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message}))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<TaskStatus>,
    clause: Option<ClauseKind>,
    mode: Option<Mode>,
    #[serde(default)]
    page: usize,
    page_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ScoreBody {
    score: f64,
    scorer: Option<String>,
}

async fn list_tasks(
    State(state): State<Arc<AppState>>,
    Path(run): Path<String>,
    Query(q): Query<ListQuery>,
) -> Result<Response, ApiError> {
    let session = state.session(&run)?;
    let filter = TaskFilter { status: q.status, clause: q.clause, mode: q.mode };
    let page = session.read().unwrap().list_tasks(&filter, q.page, q.page_size.unwrap_or(DEFAULT_PAGE_SIZE));
    Ok(Json(page).into_response())
}

async fn get_task(
    State(state): State<Arc<AppState>>,
    Path((run, id)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let session = state.session(&run)?;
    let task = session.read().unwrap().get_task(&id)?;
    Ok(Json(task).into_response())
}

async fn submit_score(
    State(state): State<Arc<AppState>>,
    Path((run, id)): Path<(String, String)>,
    Json(body): Json<ScoreBody>,
) -> Result<Response, ApiError> {
    let session = state.session(&run)?;
    let scorer = body.scorer.unwrap_or_else(|| "reviewer".into());
    // The write lock serializes submissions; the store syncs before returning.
    let ack = tokio::task::block_in_place(|| session.write().unwrap().submit_score(&id, body.score, &scorer))?;
    Ok(Json(ack).into_response())
}

async fn report(State(state): State<Arc<AppState>>, Path(run): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&run)?;
    let report = session.read().unwrap().report()?;
    Ok(Json(report).into_response())
}

async fn require_token(State(state): State<Arc<AppState>>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let supplied = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if supplied != Some(token.as_str()) {
            return ApiError { status: StatusCode::UNAUTHORIZED, message: "missing or invalid bearer token".into() }
                .into_response();
        }
    }
    next.run(request).await
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/runs/:run/tasks", get(list_tasks))
        .route("/runs/:run/tasks/:id", get(get_task))
        .route("/runs/:run/tasks/:id/score", post(submit_score))
        .route("/runs/:run/report", get(report))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    tracing::info!("shutting down");
}

pub async fn serve(addr: SocketAddr, app: Router) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot listen on {addr}"))?;
    let local = listener.local_addr()?;
    // Printed on stdout so callers using port 0 can find the service.
    println!("listening on http://{local}");
    tracing::info!(%local, "review service started");
    axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;
    Ok(())
}
