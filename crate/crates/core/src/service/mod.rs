//! HTTP review service: pending explanations, corrections, sessions, and
//! retraining.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/health` | `{initialized}` |
//! | GET | `/inferences?status=pending\|submitted` | summaries in id order |
//! | GET | `/explanations/{id}` | explanation plus five options per hop |
//! | POST | `/corrections` | `{explanation_id, hop_index, chosen, session_id?}` |
//! | POST | `/sessions` | `{explanation_ids?}` |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/cursor` | `{cursor}` |
//! | POST | `/sessions/{id}/submit` | |
//! | POST | `/retrain` | queues a job, 409 while one is active |
//! | GET | `/jobs`, `/jobs/{id}` | |
//!
//! Every route but `/health` answers 503 until a store is loaded.

mod store;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;
use tracing::{error, info};

use crate::error::{Error, Result};

pub use store::{
    run_retrain, CorrectionRequest, ExplanationView, HopView, InferenceSummary, JobStatus, LoggedCorrection,
    OptionView, RetrainInputs, RetrainJob, RetrainOutcome, ReviewSession, ReviewStatus, ServiceConfig, ServiceError,
    SessionStatus, Store, StoredExplanation,
};

pub struct AppState {
    store: RwLock<Option<Store>>,
}

impl AppState {
    /// State over `dir`, loading the store when one exists there.
    pub fn open(dir: &Path) -> Result<Arc<Self>> {
        let store = if Store::exists(dir) { Some(Store::open(dir)?) } else { None };
        Ok(Arc::new(AppState { store: RwLock::new(store) }))
    }

    pub fn with_store(store: Store) -> Arc<Self> {
        Arc::new(AppState { store: RwLock::new(Some(store)) })
    }

    pub fn uninitialized() -> Arc<Self> {
        Arc::new(AppState { store: RwLock::new(None) })
    }
}

type Shared = Arc<AppState>;

enum ApiError {
    Unavailable,
    Service(ServiceError),
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::Service(e)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Service(ServiceError::Internal(e))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, msg) = match self {
            ApiError::Unavailable => (StatusCode::SERVICE_UNAVAILABLE, "service is not initialized".to_string()),
            ApiError::Service(e) => {
                let code = match &e {
                    ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
                    ServiceError::Conflict(_) => StatusCode::CONFLICT,
                    ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
                };
                (code, e.to_string())
            }
        };
        (code, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

macro_rules! read_store {
    ($st:expr) => {{
        let guard = $st.store.read().await;
        if guard.is_none() {
            return Err(ApiError::Unavailable);
        }
        guard
    }};
}

macro_rules! write_store {
    ($st:expr) => {{
        let guard = $st.store.write().await;
        if guard.is_none() {
            return Err(ApiError::Unavailable);
        }
        guard
    }};
}

pub fn router(state: Shared, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/inferences", get(inferences))
        .route("/explanations/{id}", get(explanation))
        .route("/corrections", post(correct))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/cursor", post(set_cursor))
        .route("/sessions/{id}/submit", post(submit_session))
        .route("/retrain", post(retrain))
        .route("/jobs", get(jobs))
        .route("/jobs/{id}", get(job))
        .with_state(state);
    let api = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.layer(CorsLayer::permissive())
}

/// Serve until the process stops.
pub async fn serve(state: Shared, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::io(addr.to_string(), e))?;
    info!(%addr, "review service listening");
    axum::serve(listener, router(state, ui_dir.as_deref())).await.map_err(|e| Error::io(addr.to_string(), e))
}

async fn health(State(st): State<Shared>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "initialized": st.store.read().await.is_some() }))
}

#[derive(Deserialize)]
struct InferenceQuery {
    status: Option<ReviewStatus>,
}

async fn inferences(
    State(st): State<Shared>,
    Query(q): Query<InferenceQuery>,
) -> ApiResult<Json<Vec<InferenceSummary>>> {
    let g = read_store!(st);
    Ok(Json(g.as_ref().expect("checked").inferences(q.status)))
}

async fn explanation(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ExplanationView>> {
    let g = read_store!(st);
    Ok(Json(g.as_ref().expect("checked").explanation(&id)?))
}

async fn correct(
    State(st): State<Shared>,
    Json(req): Json<CorrectionRequest>,
) -> ApiResult<(StatusCode, Json<LoggedCorrection>)> {
    let mut g = write_store!(st);
    let (rec, created) = g.as_mut().expect("checked").correct(&req)?;
    Ok((if created { StatusCode::CREATED } else { StatusCode::OK }, Json(rec)))
}

#[derive(Default, Deserialize)]
struct SessionRequest {
    explanation_ids: Option<Vec<String>>,
}

/// An empty body queues every pending inference.
async fn create_session(State(st): State<Shared>, body: Bytes) -> ApiResult<(StatusCode, Json<ReviewSession>)> {
    let req: SessionRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SessionRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::Unprocessable(e.to_string()))?
    };
    let mut g = write_store!(st);
    Ok((StatusCode::CREATED, Json(g.as_mut().expect("checked").create_session(req.explanation_ids)?)))
}

async fn session(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ReviewSession>> {
    let g = read_store!(st);
    Ok(Json(g.as_ref().expect("checked").session(&id)?))
}

#[derive(Deserialize)]
struct CursorRequest {
    cursor: usize,
}

async fn set_cursor(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<CursorRequest>,
) -> ApiResult<Json<ReviewSession>> {
    let mut g = write_store!(st);
    Ok(Json(g.as_mut().expect("checked").set_cursor(&id, req.cursor)?))
}

async fn submit_session(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ReviewSession>> {
    let mut g = write_store!(st);
    Ok(Json(g.as_mut().expect("checked").submit_session(&id)?))
}

async fn retrain(State(st): State<Shared>) -> ApiResult<(StatusCode, Json<RetrainJob>)> {
    let job = {
        let mut g = write_store!(st);
        g.as_mut().expect("checked").start_job()?
    };
    let id = job.id.clone();
    let state = st.clone();
    tokio::spawn(async move {
        let inputs = {
            let mut g = state.store.write().await;
            g.as_mut().expect("store stays loaded").begin_job(&id)
        };
        let outcome = match inputs {
            Ok(inputs) => tokio::task::spawn_blocking(move || run_retrain(inputs))
                .await
                .unwrap_or_else(|e| Err(Error::InvalidConfig(format!("retrain task panicked: {e}")))),
            Err(e) => Err(e),
        };
        let mut g = state.store.write().await;
        if let Err(e) = g.as_mut().expect("store stays loaded").finish_job(&id, outcome) {
            error!(job = %id, "could not record retrain result: {e}");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

#[derive(Serialize)]
struct JobList {
    jobs: Vec<RetrainJob>,
}

async fn jobs(State(st): State<Shared>) -> ApiResult<Json<JobList>> {
    let g = read_store!(st);
    Ok(Json(JobList { jobs: g.as_ref().expect("checked").jobs.values().cloned().collect() }))
}

async fn job(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<RetrainJob>> {
    let g = read_store!(st);
    Ok(Json(g.as_ref().expect("checked").job(&id)?))
}
