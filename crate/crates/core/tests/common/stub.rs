//! Stub model server speaking the remote classifier wire contract.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

#[derive(Debug, Clone)]
pub enum Reply {
    /// Same confidence for every item.
    Confidence(f64),
    /// Raw body, sent as-is with status 200.
    Raw(&'static str),
    Status(u16),
}

#[derive(Default)]
pub struct Counters {
    pub requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub bodies: Mutex<Vec<Value>>,
}

pub struct StubModel {
    pub addr: SocketAddr,
    pub counters: Arc<Counters>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl StubModel {
    pub fn start(reply: Reply, delay: Duration) -> Self {
        let counters = Arc::new(Counters::default());
        let c = counters.clone();
        let handler = move |Json(body): Json<Value>| {
            let c = c.clone();
            let reply = reply.clone();
            async move {
                c.requests.fetch_add(1, Ordering::SeqCst);
                let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                c.max_in_flight.fetch_max(now, Ordering::SeqCst);
                let n = body.as_array().map(|a| a.len()).unwrap_or(0);
                c.bodies.lock().unwrap().push(body);
                tokio::time::sleep(delay).await;
                c.in_flight.fetch_sub(1, Ordering::SeqCst);
                let resp: Response = match reply {
                    Reply::Confidence(v) => Json(vec![json!({ "confidence": v }); n]).into_response(),
                    Reply::Raw(s) => ([("content-type", "application/json")], s).into_response(),
                    Reply::Status(code) => StatusCode::from_u16(code).unwrap().into_response(),
                };
                resp
            }
        };
        let app = Router::new().route("/score", post(handler));

        let (tx, rx) = oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        StubModel {
            addr,
            counters,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}/score", self.addr)
    }
}

impl Drop for StubModel {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// An address nothing listens on.
pub fn closed_port_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/score")
}
