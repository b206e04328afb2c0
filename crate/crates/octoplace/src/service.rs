//! HTTP API behind the blind judgment UI.
//!
//! | route                              | response                                  |
//! |------------------------------------|-------------------------------------------|
//! | `GET /api/task/next?evaluator=e1`  | next unjudged task for `e1`, blinded      |
//! | `POST /api/judgment`               | `{"status": "recorded"}`, 409 on repeats  |
//! | `GET /api/report`                  | summaries of every judgment so far        |
//! | `GET /api/image/{id}`              | `<images>/{id}.png`                       |
//!
//! Task payloads carry only the task id, the object, image URLs and marker
//! pixels; which method produced which side stays on the server.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use octoplace_core::evaluation::{unblind, JudgmentBook, JudgmentRecord, PairTask, Side};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::study::{read_schedule, JudgmentLog, Report, StudyError};

pub const DEFAULT_PORT: u16 = 8089;
pub const PORT_VAR: &str = "OCTO_PORT";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot load schedule: {0}")]
    Schedule(#[source] StudyError),
    #[error("cannot open judgment log: {0}")]
    Log(#[source] StudyError),
    #[error("schedule references image {id:?} but {path} is missing")]
    MissingImage { id: String, path: PathBuf },
    #[error("invalid image id {0:?} in schedule")]
    BadImageId(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

/// Image ids double as file stems, so only a safe character set is allowed.
pub fn valid_image_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

struct Session {
    book: JudgmentBook,
    log: JudgmentLog,
    /// Index of the first task each evaluator may still need.
    cursors: BTreeMap<String, usize>,
    judged: BTreeMap<String, usize>,
}

pub struct StudyService {
    tasks: Vec<PairTask>,
    index: BTreeMap<String, usize>,
    images: PathBuf,
    session: Mutex<Session>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Marker {
    pub image_url: String,
    pub x: u32,
    pub y: u32,
}

/// `GET /api/task/next` body. All fields but `remaining` are null once the
/// evaluator has judged everything.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TaskPayload {
    pub task_id: Option<String>,
    pub object: Option<String>,
    pub left: Option<Marker>,
    pub right: Option<Marker>,
    pub remaining: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub task_id: String,
    pub evaluator: String,
    pub side: String,
}

#[derive(Debug)]
pub enum SubmitError {
    BadRequest(String),
    UnknownTask(String),
    Conflict { task_id: String, evaluator: String },
    Storage(StudyError),
}

impl StudyService {
    /// Loads the schedule, replays the log and checks that every scheduled
    /// image exists.
    pub fn open(schedule: &Path, log: &Path, images: &Path) -> Result<Self, ServiceError> {
        let tasks = read_schedule(schedule).map_err(ServiceError::Schedule)?;
        for t in &tasks {
            if !valid_image_id(&t.image_id) {
                return Err(ServiceError::BadImageId(t.image_id.clone()));
            }
            let path = images.join(format!("{}.png", t.image_id));
            if !path.is_file() {
                return Err(ServiceError::MissingImage {
                    id: t.image_id.clone(),
                    path,
                });
            }
        }
        let (log, records) = JudgmentLog::open(log).map_err(ServiceError::Log)?;
        Report::build(&records, &tasks).map_err(ServiceError::Log)?;
        let mut judged = BTreeMap::new();
        for r in &records {
            *judged.entry(r.evaluator.clone()).or_insert(0) += 1;
        }
        let book = JudgmentBook::replay(records).map_err(|e| ServiceError::Log(e.into()))?;
        let index = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.task_id.clone(), i))
            .collect();
        Ok(Self {
            tasks,
            index,
            images: images.to_path_buf(),
            session: Mutex::new(Session {
                book,
                log,
                cursors: BTreeMap::new(),
                judged,
            }),
        })
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn next_task(&self, evaluator: &str) -> TaskPayload {
        let mut guard = self.session.lock().unwrap();
        let session = &mut *guard;
        let cursor = session.cursors.entry(evaluator.to_string()).or_insert(0);
        while *cursor < self.tasks.len() && session.book.is_judged(&self.tasks[*cursor].task_id, evaluator) {
            *cursor += 1;
        }
        let remaining = self.tasks.len() - session.judged.get(evaluator).copied().unwrap_or(0);
        let Some(task) = self.tasks.get(*cursor) else {
            return TaskPayload {
                task_id: None,
                object: None,
                left: None,
                right: None,
                remaining: 0,
            };
        };
        let marker = |x, y| Marker {
            image_url: format!("/api/image/{}", task.image_id),
            x,
            y,
        };
        TaskPayload {
            task_id: Some(task.task_id.clone()),
            object: Some(task.object.clone()),
            left: Some(marker(task.left.x, task.left.y)),
            right: Some(marker(task.right.x, task.right.y)),
            remaining,
        }
    }

    /// Un-blinds and durably logs a verdict. The record is only kept in
    /// memory once it is on disk.
    pub fn submit(&self, request: &JudgmentRequest, timestamp: u64) -> Result<JudgmentRecord, SubmitError> {
        if request.evaluator.trim().is_empty() {
            return Err(SubmitError::BadRequest("evaluator must be non-empty".into()));
        }
        let side: Side = request
            .side
            .parse()
            .map_err(|e: octoplace_core::evaluation::EvalError| SubmitError::BadRequest(e.to_string()))?;
        let task = self
            .index
            .get(&request.task_id)
            .map(|&i| &self.tasks[i])
            .ok_or_else(|| SubmitError::UnknownTask(request.task_id.clone()))?;
        let mut session = self.session.lock().unwrap();
        if session.book.is_judged(&task.task_id, &request.evaluator) {
            return Err(SubmitError::Conflict {
                task_id: task.task_id.clone(),
                evaluator: request.evaluator.clone(),
            });
        }
        let record = JudgmentRecord {
            task_id: task.task_id.clone(),
            comparison: task.comparison,
            outcome: unblind(task, side),
            evaluator: request.evaluator.clone(),
            timestamp,
        };
        session.log.append(&record).map_err(SubmitError::Storage)?;
        session
            .book
            .insert(record.clone())
            .expect("duplicate checked under the same lock");
        *session.judged.entry(record.evaluator.clone()).or_insert(0) += 1;
        Ok(record)
    }

    pub fn report(&self) -> Report {
        let session = self.session.lock().unwrap();
        Report::from_records(session.book.records())
    }

    pub fn image_path(&self, id: &str) -> Option<PathBuf> {
        valid_image_id(id).then(|| self.images.join(format!("{id}.png")))
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Deserialize)]
struct NextQuery {
    evaluator: Option<String>,
}

async fn next_task(State(service): State<Arc<StudyService>>, Query(q): Query<NextQuery>) -> Response {
    match q.evaluator.filter(|e| !e.trim().is_empty()) {
        Some(e) => Json(service.next_task(&e)).into_response(),
        None => error(StatusCode::BAD_REQUEST, "missing evaluator"),
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn judgment(State(service): State<Arc<StudyService>>, body: Bytes) -> Response {
    let request: JudgmentRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let result = tokio::task::spawn_blocking(move || service.submit(&request, now_ms())).await;
    match result {
        Ok(Ok(_)) => Json(json!({ "status": "recorded" })).into_response(),
        Ok(Err(SubmitError::BadRequest(m))) => error(StatusCode::BAD_REQUEST, m),
        Ok(Err(SubmitError::UnknownTask(id))) => error(StatusCode::NOT_FOUND, format!("unknown task {id}")),
        Ok(Err(SubmitError::Conflict { task_id, evaluator })) => error(
            StatusCode::CONFLICT,
            format!("{task_id} was already judged by {evaluator}"),
        ),
        Ok(Err(SubmitError::Storage(e))) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn report(State(service): State<Arc<StudyService>>) -> Response {
    Json(service.report()).into_response()
}

async fn image(State(service): State<Arc<StudyService>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(path) = service.image_path(&id) else {
        return error(StatusCode::BAD_REQUEST, format!("invalid image id {id:?}"));
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, format!("no image {id}")),
    }
}

pub fn router(service: Arc<StudyService>) -> Router {
    Router::new()
        .route("/api/task/next", get(next_task))
        .route("/api/judgment", post(judgment))
        .route("/api/report", get(report))
        .route("/api/image/{id}", get(image))
        .with_state(service)
}

/// Port from `OCTO_PORT`, else the default.
pub fn port_from_env() -> Result<u16, String> {
    match std::env::var(PORT_VAR) {
        Ok(v) => v.parse().map_err(|_| format!("{PORT_VAR}={v:?} is not a port")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServiceError> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<StudyService>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServiceError::Serve)
}
