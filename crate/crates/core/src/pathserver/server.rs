use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use tokio::net::{TcpListener, ToSocketAddrs};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::{ServerError, VERSION_HEADER};
use crate::pathcodec::{decode_wire, encode_wire, PathPlan, WireError};

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    /// Wire bytes exactly as accepted.
    pub payload: Vec<u8>,
    pub version: u64,
    pub updated_at: SystemTime,
}

impl PathRecord {
    pub fn from_plan(plan: &PathPlan, version: u64) -> Self {
        Self {
            payload: encode_wire(plan),
            version,
            updated_at: SystemTime::now(),
        }
    }
}

/// The single path record. Writers swap a whole `Arc` under a short write
/// lock, so readers only ever see complete records.
#[derive(Debug, Default)]
pub struct PathStore {
    current: RwLock<Option<Arc<PathRecord>>>,
}

impl PathStore {
    pub fn new(initial: Option<PathRecord>) -> Self {
        Self {
            current: RwLock::new(initial.map(Arc::new)),
        }
    }

    pub fn get(&self) -> Option<Arc<PathRecord>> {
        self.current.read().expect("store lock poisoned").clone()
    }

    /// Validates `body` and replaces the record. Returns the new version.
    pub fn put(&self, body: &[u8]) -> Result<u64, WireError> {
        decode_wire(body)?;
        let mut slot = self.current.write().expect("store lock poisoned");
        let version = slot.as_ref().map_or(0, |r| r.version) + 1;
        *slot = Some(Arc::new(PathRecord {
            payload: body.to_vec(),
            version,
            updated_at: SystemTime::now(),
        }));
        Ok(version)
    }

    pub fn handle_get(&self) -> Response {
        match self.get() {
            Some(record) => (
                StatusCode::OK,
                [
                    (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
                    (VERSION_HEADER, HeaderValue::from(record.version)),
                ],
                record.payload.clone(),
            )
                .into_response(),
            None => error_response(StatusCode::NOT_FOUND, "no-plan", "no path has been published"),
        }
    }

    pub fn handle_put(&self, body: &[u8]) -> Response {
        match self.put(body) {
            Ok(version) => (
                StatusCode::NO_CONTENT,
                [(VERSION_HEADER, HeaderValue::from(version))],
            )
                .into_response(),
            Err(e) => error_response(StatusCode::BAD_REQUEST, e.reason(), &e.to_string()),
        }
    }
}

fn error_response(status: StatusCode, reason: &str, detail: &str) -> Response {
    let body = serde_json::json!({ "error": reason, "detail": detail });
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body.to_string(),
    )
        .into_response()
}

pub fn router(store: Arc<PathStore>) -> Router {
    Router::new()
        .route(
            "/path",
            get(get_path).put(put_path).post(put_path),
        )
        .route("/health", get(|| async { "ok" }))
        .with_state(store)
}

async fn get_path(State(store): State<Arc<PathStore>>) -> Response {
    store.handle_get()
}

async fn put_path(State(store): State<Arc<PathStore>>, body: Bytes) -> Response {
    store.handle_put(&body)
}

/// A running path service. Dropping the handle leaves the server running;
/// call [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    addr: SocketAddr,
    store: Arc<PathStore>,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://<addr>` of the running service.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn store(&self) -> &Arc<PathStore> {
        &self.store
    }

    /// Stops accepting connections, drains in-flight requests and waits for exit.
    pub async fn shutdown(mut self) -> Result<(), ServerError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match (&mut self.task).await {
            Ok(result) => result.map_err(ServerError::Io),
            Err(e) => Err(ServerError::Io(std::io::Error::other(e))),
        }
    }

    /// Resolves when the server exits on its own.
    pub async fn wait(mut self) -> Result<(), ServerError> {
        match (&mut self.task).await {
            Ok(result) => result.map_err(ServerError::Io),
            Err(e) => Err(ServerError::Io(std::io::Error::other(e))),
        }
    }
}

/// Binds `addr` and serves `GET|PUT|POST /path` and `GET /health`.
pub async fn serve(
    addr: impl ToSocketAddrs,
    initial: Option<PathRecord>,
) -> Result<ServerHandle, ServerError> {
    let listener = TcpListener::bind(addr).await.map_err(ServerError::Bind)?;
    let local = listener.local_addr().map_err(ServerError::Bind)?;
    let store = Arc::new(PathStore::new(initial));
    let app = router(store.clone());
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServerHandle {
        addr: local,
        store,
        shutdown: Some(tx),
        task,
    })
}
