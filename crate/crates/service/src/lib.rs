//! HTTP surface: the retrieval endpoint and the encoder wire protocol.
//!
//! ```text
//! GET  /v1/health
//! POST /v1/retrieve          retrieval over an immutable snapshot
//! GET  /v1/info              \
//! POST /v1/embed              } encoder protocol, served from any backend
//! POST /v1/itm               /
//! ```
//!
//! Errors are JSON bodies of the form `{"error": "..."}`.

pub mod conformance;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use skillground::retrieval::wire::{
    serve_embed, serve_info, serve_itm, EmbedRequest, EmbedResponse, InfoResponse, ItmRequest,
    ItmResponse, RetrieveRequest, ServeError,
};
use skillground::retrieval::{
    EmbeddingIndex, EncoderBackend, RenderConfig, RetrievalError, RetrievalResult, Retriever,
};
use skillground::SkillDatabase;

pub const MAX_BODY_BYTES: usize = 8 * 1024 * 1024;

/// Database, index and backend frozen for the lifetime of a server.
pub struct Snapshot {
    pub db: SkillDatabase,
    pub index: EmbeddingIndex,
    pub backend: Arc<dyn EncoderBackend>,
    pub render: RenderConfig,
}

impl Snapshot {
    pub fn new(
        db: SkillDatabase,
        index: EmbeddingIndex,
        backend: Arc<dyn EncoderBackend>,
    ) -> Result<Self, RetrievalError> {
        Retriever::new(&db, &index, &*backend)?;
        Ok(Self {
            db,
            index,
            backend,
            render: RenderConfig::default(),
        })
    }

    pub fn retrieve(&self, req: &RetrieveRequest) -> Result<RetrievalResult, ApiError> {
        let query = req.query.to_query().map_err(ApiError::bad_request)?;
        let retriever = Retriever::new(&self.db, &self.index, &*self.backend)
            .map_err(ApiError::from)?
            .with_render(self.render);
        retriever.retrieve(&query, req.k, req.method).map_err(ApiError::from)
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(e: impl ToString) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: e.to_string(),
        }
    }

    fn internal(e: impl ToString) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        }
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        let status = match &e {
            RetrievalError::BadK { .. } | RetrievalError::EmptyQuery | RetrievalError::Image(_) => {
                StatusCode::BAD_REQUEST
            }
            RetrievalError::Backend { .. } | RetrievalError::Dimension { .. } | RetrievalError::DegenerateEmbedding => {
                StatusCode::BAD_GATEWAY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<ServeError> for ApiError {
    fn from(e: ServeError) -> Self {
        let status = match e {
            ServeError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServeError::Backend(_) => StatusCode::BAD_GATEWAY,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self {
            status: e.status(),
            message: e.body_text(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn retrieve(
    State(snapshot): State<Arc<Snapshot>>,
    body: Result<Json<RetrieveRequest>, JsonRejection>,
) -> Result<Json<RetrievalResult>, ApiError> {
    let Json(req) = body?;
    blocking(move || snapshot.retrieve(&req)).await.map(Json)
}

async fn info(State(backend): State<Arc<dyn EncoderBackend>>) -> Json<InfoResponse> {
    Json(serve_info(&*backend))
}

async fn embed(
    State(backend): State<Arc<dyn EncoderBackend>>,
    body: Result<Json<EmbedRequest>, JsonRejection>,
) -> Result<Json<EmbedResponse>, ApiError> {
    let Json(req) = body?;
    blocking(move || serve_embed(&*backend, &req).map_err(ApiError::from))
        .await
        .map(Json)
}

async fn itm(
    State(backend): State<Arc<dyn EncoderBackend>>,
    body: Result<Json<ItmRequest>, JsonRejection>,
) -> Result<Json<ItmResponse>, ApiError> {
    let Json(req) = body?;
    blocking(move || serve_itm(&*backend, &req).map_err(ApiError::from))
        .await
        .map(Json)
}

fn encoder_routes(backend: Arc<dyn EncoderBackend>) -> Router {
    Router::new()
        .route("/v1/info", get(info))
        .route("/v1/embed", post(embed))
        .route("/v1/itm", post(itm))
        .with_state(backend)
}

/// Health plus the encoder protocol for `backend`.
pub fn encoder_app(backend: Arc<dyn EncoderBackend>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .merge(encoder_routes(backend))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
}

/// Health and retrieval; with `expose_encoder` the snapshot's backend is
/// also served over the encoder protocol.
pub fn app(snapshot: Arc<Snapshot>, expose_encoder: bool) -> Router {
    let backend = Arc::clone(&snapshot.backend);
    let mut router = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/retrieve", post(retrieve))
        .with_state(snapshot);
    if expose_encoder {
        router = router.merge(encoder_routes(backend));
    }
    router.layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
}

/// Serve until `shutdown` resolves, then finish in-flight requests.
pub async fn serve(
    listener: TcpListener,
    router: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        if let Err(e) = tokio::signal::ctrl_c().await {
            log::warn!("cannot listen for Ctrl-C: {e}");
            std::future::pending::<()>().await;
        }
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(e) => {
                log::warn!("cannot listen for SIGTERM: {e}");
                std::future::pending::<()>().await;
            }
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

/// Bind `addr`, report the bound address, and serve on a fresh runtime until
/// Ctrl-C or SIGTERM.
pub fn run_until_signal(
    router: Router,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = TcpListener::bind(addr).await?;
        on_bound(listener.local_addr()?);
        serve(listener, router, shutdown_signal()).await
    })
}

/// A server running on its own runtime thread.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Bind `addr` (port 0 picks a free port) and start serving `router`.
    pub fn start(router: Router, addr: SocketAddr) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, router, async {
                let _ = rx.await;
            }))
        });
        Ok(Self {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Request a graceful shutdown and wait for the server to exit.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
