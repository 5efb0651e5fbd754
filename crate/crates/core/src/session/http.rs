//! JSON over HTTP.
//!
//! | method | path                          | body                          |
//! |--------|-------------------------------|-------------------------------|
//! | POST   | `/api/sessions`               | `{"participant_id": "..."}`   |
//! | GET    | `/api/sessions/{id}/task`     |                               |
//! | POST   | `/api/sessions/{id}/assign`   | `{"patient": 0, "slot": 3}`   |
//! | POST   | `/api/sessions/{id}/submit`   |                               |
//! | POST   | `/api/sessions/{id}/next`     |                               |
//!
//! `"slot": null` unassigns. Errors come back as
//! `{"error": "<code>", "message": "..."}` with a 4xx or 5xx status.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::{SessionError, SessionManager, SessionStart, TaskPayload, TICK};
use crate::human::HumanDecisionRecord;

#[derive(Debug, Deserialize)]
struct CreateBody {
    participant_id: String,
}

#[derive(Debug, Deserialize)]
struct AssignBody {
    patient: usize,
    slot: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitReply {
    pub record: HumanDecisionRecord,
    pub task: TaskPayload,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
    pub message: String,
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        use SessionError::*;
        let status = match &self {
            InvalidParticipant | UnknownPatient(_) | UnknownSlot(_) => StatusCode::BAD_REQUEST,
            UnknownSession(_) => StatusCode::NOT_FOUND,
            DeadlinePassed => StatusCode::GONE,
            DuplicateSession(_) | CapacityExceeded { .. } | AlreadyAssigned { .. } | NotAssigned { .. }
            | NotActive | TaskOpen | EarlySubmit { .. } | Finished => StatusCode::CONFLICT,
            Engine(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorReply {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type AppState = Arc<SessionManager>;
type Reply<T> = Result<Json<T>, SessionError>;

async fn create(State(m): State<AppState>, Json(body): Json<CreateBody>) -> Result<(StatusCode, Json<SessionStart>), SessionError> {
    Ok((StatusCode::CREATED, Json(m.start_session(&body.participant_id)?)))
}

async fn task(State(m): State<AppState>, Path(id): Path<String>) -> Reply<TaskPayload> {
    Ok(Json(m.current_task(&id)?))
}

async fn assign(State(m): State<AppState>, Path(id): Path<String>, Json(body): Json<AssignBody>) -> Reply<TaskPayload> {
    Ok(Json(m.apply_assignment(&id, body.patient, body.slot)?))
}

async fn submit(State(m): State<AppState>, Path(id): Path<String>) -> Reply<SubmitReply> {
    let record = m.submit(&id)?;
    Ok(Json(SubmitReply {
        record,
        task: m.current_task(&id)?,
    }))
}

async fn next(State(m): State<AppState>, Path(id): Path<String>) -> Reply<TaskPayload> {
    Ok(Json(m.next_task(&id)?))
}

/// API routes, plus the UI bundle from `static_dir` when given.
pub fn router(manager: Arc<SessionManager>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}/task", get(task))
        .route("/api/sessions/{id}/assign", post(assign))
        .route("/api/sessions/{id}/submit", post(submit))
        .route("/api/sessions/{id}/next", post(next))
        .with_state(manager);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    pub static_dir: Option<PathBuf>,
}

/// Serves until the process ends, timing out overdue tasks every 100 ms.
pub async fn serve(manager: Arc<SessionManager>, options: ServeOptions) -> std::io::Result<()> {
    let ticker = Arc::clone(&manager);
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(TICK);
        loop {
            interval.tick().await;
            ticker.tick();
        }
    });
    let listener = tokio::net::TcpListener::bind(options.addr).await?;
    axum::serve(listener, router(manager, options.static_dir)).await
}
