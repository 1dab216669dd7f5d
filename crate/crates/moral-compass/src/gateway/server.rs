//! HTTP front end: one endpoint per dialog action.
//!
//! POST /api/session            → {"session_id"}
//! POST /api/ask                → full response plan (clarifications
//!                                are normal 200 answers, never 4xx)
//! POST /api/feedback           → acknowledgement
//! GET  /api/training/next      → next bank question for the session
//! POST /api/training/answer    → acknowledgement
//! GET  /api/stats              → log aggregates
//! GET  /healthz                → {"status":"ok"}
//!
//! Handlers run the blocking service calls on the blocking thread pool;
//! errors map to 404 (unknown ids / empty bank), 502 (embedding backend
//! trouble), 400 (invalid input), or 500.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use crate::dialog::{QuestionBankEntry, ResponsePlan};
use crate::error::{Error, Result};
use crate::moral::Verdict;
use crate::store::Stats;

use super::config::Config;
use super::service::Service;

#[derive(Serialize)]
struct SessionResponse {
    session_id: String,
}

#[derive(Deserialize)]
struct AskRequest {
    session_id: String,
    utterance: String,
}

#[derive(Deserialize)]
struct FeedbackRequest {
    session_id: String,
    turn_id: u64,
    agrees: bool,
    #[serde(default)]
    alternative_verdict: Option<Verdict>,
}

#[derive(Deserialize)]
struct TrainingNextParams {
    session_id: String,
}

#[derive(Deserialize)]
struct TrainingAnswerRequest {
    session_id: String,
    bank_id: u64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct AckResponse {
    message: String,
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownTurn(_)
            | Error::UnknownSession(_)
            | Error::UnknownBankEntry(_)
            | Error::EmptyBank
            | Error::MissingFile(_) => StatusCode::NOT_FOUND,
            Error::BackendUnavailable(_) | Error::DimensionMismatch { .. } => {
                StatusCode::BAD_GATEWAY
            }
            Error::InvalidFeedback(_)
            | Error::InvalidValue { .. }
            | Error::UnknownKey(_)
            | Error::EmptyText
            | Error::NoTemplateMatch
            | Error::MissingPrototype(_)
            | Error::BankEntryUnparseable { .. }
            | Error::Json(_) => StatusCode::BAD_REQUEST,
            Error::Io(_) | Error::Server(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.0.to_string() })).into_response()
    }
}

/// Service calls block (file appends, possibly a remote embedding
/// request), so they run off the async threads.
async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T> + Send + 'static,
) -> std::result::Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Server(e.to_string())))?
        .map_err(ApiError)
}

async fn create_session(State(service): State<Arc<Service>>) -> Json<SessionResponse> {
    Json(SessionResponse {
        session_id: service.create_session(),
    })
}

async fn ask(
    State(service): State<Arc<Service>>,
    Json(req): Json<AskRequest>,
) -> std::result::Result<Json<ResponsePlan>, ApiError> {
    run_blocking(move || service.ask(&req.session_id, &req.utterance))
        .await
        .map(Json)
}

async fn feedback(
    State(service): State<Arc<Service>>,
    Json(req): Json<FeedbackRequest>,
) -> std::result::Result<Json<AckResponse>, ApiError> {
    let message = run_blocking(move || {
        service.feedback(
            &req.session_id,
            req.turn_id,
            req.agrees,
            req.alternative_verdict,
        )
    })
    .await?;
    Ok(Json(AckResponse {
        message: message.to_string(),
    }))
}

async fn training_next(
    State(service): State<Arc<Service>>,
    Query(params): Query<TrainingNextParams>,
) -> std::result::Result<Json<QuestionBankEntry>, ApiError> {
    run_blocking(move || service.training_next(&params.session_id))
        .await
        .map(Json)
}

async fn training_answer(
    State(service): State<Arc<Service>>,
    Json(req): Json<TrainingAnswerRequest>,
) -> std::result::Result<Json<AckResponse>, ApiError> {
    let message =
        run_blocking(move || service.training_answer(&req.session_id, req.bank_id, req.verdict))
            .await?;
    Ok(Json(AckResponse {
        message: message.to_string(),
    }))
}

async fn stats(
    State(service): State<Arc<Service>>,
) -> std::result::Result<Json<Stats>, ApiError> {
    run_blocking(move || service.stats()).await.map(Json)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/ask", post(ask))
        .route("/api/feedback", post(feedback))
        .route("/api/training/next", get(training_next))
        .route("/api/training/answer", post(training_answer))
        .route("/api/stats", get(stats))
        .route("/healthz", get(healthz))
        .with_state(service)
}

/// A server running on its own thread (and runtime). Dropping it shuts
/// the listener down and joins the thread.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Binds `addr` (port 0 picks a free one) and serves in a background
/// thread until dropped/stopped.
pub fn start(service: Arc<Service>, addr: SocketAddr) -> Result<RunningServer> {
    let (addr_tx, addr_rx) = std::sync::mpsc::channel::<Result<SocketAddr>>();
    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();

    let thread = std::thread::spawn(move || {
        let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
            Ok(rt) => rt,
            Err(e) => {
                let _ = addr_tx.send(Err(Error::Server(e.to_string())));
                return;
            }
        };
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(addr).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = addr_tx.send(Err(Error::Server(format!("bind {addr}: {e}"))));
                    return;
                }
            };
            match listener.local_addr() {
                Ok(local) => {
                    let _ = addr_tx.send(Ok(local));
                }
                Err(e) => {
                    let _ = addr_tx.send(Err(Error::Server(e.to_string())));
                    return;
                }
            }
            let _ = axum::serve(listener, router(service))
                .with_graceful_shutdown(async {
                    let _ = shutdown_rx.await;
                })
                .await;
        });
    });

    let addr = addr_rx
        .recv()
        .map_err(|_| Error::Server("server thread exited before binding".into()))??;
    Ok(RunningServer {
        addr,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

/// Builds the service from `config` and serves on its listen address
/// until Ctrl-C.
pub fn serve(config: &Config) -> Result<()> {
    let service = Arc::new(Service::new(config)?);
    let addr: SocketAddr = config
        .listen_addr
        .parse()
        .map_err(|_| Error::InvalidValue {
            key: "listen.addr".into(),
            constraint: "must be an address:port pair".into(),
        })?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Server(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Server(format!("bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Error::Server(e.to_string()))?;
        eprintln!("listening on http://{local}");
        axum::serve(listener, router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::Server(e.to_string()))
    })
}
