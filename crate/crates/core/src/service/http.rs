//! HTTP front end: `POST /analyze` and `GET /health`.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tracing::{error, info};

use super::{AnalysisRequest, AnalyzeError, Analyzer, ServiceConfig, StartupError};

/// Builds the router over a shared analyzer.
pub fn router(analyzer: Arc<Analyzer>) -> Router {
    // JSON escaping can inflate a document up to 6x (\uXXXX)
    let body_limit = analyzer.max_document_bytes().saturating_mul(6) + 64 * 1024;
    Router::new()
        .route("/analyze", post(analyze))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(analyzer)
}

fn error_body(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

async fn analyze(State(analyzer): State<Arc<Analyzer>>, Json(request): Json<AnalysisRequest>) -> Response {
    // classification may be slow (remote model); keep it off the async workers
    let result = tokio::task::spawn_blocking(move || analyzer.analyze(&request)).await;
    match result {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e @ AnalyzeError::TooLarge(_))) => error_body(StatusCode::PAYLOAD_TOO_LARGE, e.to_string()),
        Ok(Err(e @ AnalyzeError::InvalidRequest(_))) => error_body(StatusCode::BAD_REQUEST, e.to_string()),
        Err(join) => {
            error!(error = %join, "analysis task failed");
            error_body(StatusCode::INTERNAL_SERVER_ERROR, "analysis failed".into())
        }
    }
}

async fn health(State(analyzer): State<Arc<Analyzer>>) -> Response {
    Json(analyzer.health()).into_response()
}

/// Serves on an already-bound listener until `shutdown` resolves.
pub async fn serve_on<F>(listener: TcpListener, analyzer: Arc<Analyzer>, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let addr = listener.local_addr()?;
    info!(%addr, catalog_version = analyzer.catalog().version(), classifier = analyzer.classifier_id(), "listening");
    axum::serve(listener, router(analyzer))
        .with_graceful_shutdown(shutdown)
        .await
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, StartupError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| StartupError::Bind { addr, source })
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    info!("shutting down");
}

/// Loads the configuration, binds, and serves until a shutdown signal.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let analyzer = tokio::task::spawn_blocking({
        let config = config.clone();
        move || Analyzer::from_config(&config)
    })
    .await??;
    let listener = bind(config.bind).await?;
    serve_on(listener, Arc::new(analyzer), shutdown_signal()).await?;
    Ok(())
}

/// A server running on a background runtime, for tests and benchmarks.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    /// Starts serving `analyzer` on an ephemeral loopback port.
    pub fn start(analyzer: Arc<Analyzer>) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let _ = serve_on(listener, analyzer, async {
                    let _ = rx.await;
                })
                .await;
            });
        });
        Ok(BackgroundServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
