//! Shared helpers: a mock inference server that answers from a fixture
//! store, and golden demo files on disk.

#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use base64::Engine;
use octoplace::backends::wire::WireRequest;
use octoplace::backends::{request_digest, Capability, FixtureStore, Request};
use octoplace::bundle::decode_png;

/// One request as the mock server saw it.
#[derive(Debug, Clone)]
pub struct Seen {
    pub capability: String,
    pub authorization: Option<String>,
    pub body: WireRequest,
}

#[derive(Clone)]
struct Mock {
    store: Arc<FixtureStore>,
    seen: Arc<Mutex<Vec<Seen>>>,
    status: Option<StatusCode>,
}

async fn answer(
    State(mock): State<Mock>,
    UrlPath(capability): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let body: WireRequest = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    };
    mock.seen.lock().unwrap().push(Seen {
        capability: capability.clone(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
        body: body.clone(),
    });
    if let Some(status) = mock.status {
        return (status, "scripted failure").into_response();
    }
    let Ok(cap) = capability.parse::<Capability>() else {
        return (StatusCode::NOT_FOUND, "no such capability").into_response();
    };
    let image = match &body.image {
        Some(b64) => {
            let bytes = base64::engine::general_purpose::STANDARD.decode(b64).unwrap();
            Some(decode_png(&bytes, "wire").unwrap())
        }
        None => None,
    };
    let request = Request {
        image: image.as_ref(),
        text: body.text.as_deref(),
    };
    match mock.store.get(&request_digest(cap, &request)) {
        Some(v) => Json(v.clone()).into_response(),
        None => (StatusCode::NOT_FOUND, "no fixture").into_response(),
    }
}

pub struct MockServer {
    pub base_url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    /// Serves `store` over HTTP on an ephemeral port until the process ends.
    pub fn start(store: FixtureStore) -> Self {
        Self::start_with(store, None)
    }

    /// Answers every request with `status`.
    pub fn failing(status: StatusCode) -> Self {
        Self::start_with(FixtureStore::new(), Some(status))
    }

    fn start_with(store: FixtureStore, status: Option<StatusCode>) -> Self {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let mock = Mock {
            store: Arc::new(store),
            seen: seen.clone(),
            status,
        };
        let router = Router::new()
            .route("/v1/{capability}", post(answer))
            .with_state(mock);
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, router).await.unwrap();
            });
        });
        let addr = rx.recv().unwrap();
        Self {
            base_url: format!("http://{addr}"),
            seen,
        }
    }

    pub fn seen(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

/// Writes the golden demo into `dir`.
pub fn demo(dir: &Path) {
    octoplace::golden::write_demo(dir).unwrap();
}
