//! Live streaming of processed frames.
//!
//! The server is one consumer of the pipeline: a bridge thread takes frames from a
//! latest-wins [`Handoff`], encodes each once, and publishes it to every client
//! through a watch channel. Each client has an independent send loop that always
//! sends the newest frame, so a slow client skips frames instead of queueing them.
//!
//! Routes:
//!
//! - `GET /` and other paths: viewer assets, or a placeholder page.
//! - `GET /status`: pipeline [`Status`] as JSON.
//! - `GET /timings.csv`: rolling per-stage timings.
//! - `GET /wire_vectors.json`: reference messages for client decoders.
//! - `GET /stream`: WebSocket. Binary messages carry wire frames, text messages carry
//!   control commands and their replies.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use hsar_core::pipeline::{Command, Control, FrameResult, Handoff, Status};
use hsar_core::wire::encode_wireframe;
use serde::Serialize;
use tokio::sync::{mpsc, oneshot, watch};

pub use hsar_core::wire;

/// A frame as sent to clients.
#[derive(Debug, Clone)]
pub struct EncodedFrame {
    pub frame_index: u64,
    pub point_count: usize,
    pub bytes: Bytes,
}

impl EncodedFrame {
    pub fn new(result: &FrameResult) -> Self {
        EncodedFrame {
            frame_index: result.frame_index,
            point_count: result.cloud.len(),
            bytes: Bytes::from(encode_wireframe(result)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub addr: SocketAddr,
    /// Directory of viewer files served under `/`.
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ErrorReply<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

fn error_reply(detail: Option<String>) -> String {
    serde_json::to_string(&ErrorReply {
        error: "bad_request",
        detail,
    })
    .expect("plain struct")
}

/// Applies one text control message and returns the JSON reply.
///
/// Accepted commands answer with the status after the command took effect.
pub fn handle_control(control: &Control, text: &str) -> String {
    match Command::parse(text) {
        Err(_) => error_reply(None),
        Ok(cmd) => match control.apply(&cmd) {
            Ok(status) => serde_json::to_string(&status).expect("status serializes"),
            Err(e) => error_reply(Some(e.to_string())),
        },
    }
}

#[derive(Clone)]
struct AppState {
    control: Arc<Control>,
    frames: watch::Receiver<Option<EncodedFrame>>,
    assets: Option<Arc<PathBuf>>,
}

pub fn router(control: Arc<Control>, frames: watch::Receiver<Option<EncodedFrame>>, assets: Option<PathBuf>) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/timings.csv", get(timings))
        .route("/stream", get(stream))
        .route("/wire_vectors.json", get(wire_vectors))
        .fallback(get(asset))
        .with_state(AppState {
            control,
            frames,
            assets: assets.map(Arc::new),
        })
}

async fn status(State(s): State<AppState>) -> Json<Status> {
    Json(s.control.status())
}

async fn timings(State(s): State<AppState>) -> Response {
    match s.control.timings().to_csv() {
        Ok(csv) => ([(header::CONTENT_TYPE, "text/csv")], csv).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn wire_vectors() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], wire::TEST_VECTORS_JSON).into_response()
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>hsar</title></head>\
<body><h1>hsar stream</h1><p>No viewer assets configured. Frames are served on \
<code>/stream</code>, status on <a href=\"/status\">/status</a>, timings on \
<a href=\"/timings.csv\">/timings.csv</a>.</p></body></html>\n";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("wasm") => "application/wasm",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn asset(State(s): State<AppState>, uri: Uri) -> Response {
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let Some(root) = s.assets else {
        return if rel == "index.html" {
            ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER).into_response()
        } else {
            StatusCode::NOT_FOUND.into_response()
        };
    };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn stream(ws: WebSocketUpgrade, State(s): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, s))
}

async fn client(socket: WebSocket, state: AppState) {
    let (mut sink, mut incoming) = socket.split();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();
    let control = state.control.clone();
    let reader = async move {
        while let Some(Ok(msg)) = incoming.next().await {
            match msg {
                Message::Text(t) => {
                    if reply_tx.send(handle_control(&control, t.as_str())).is_err() {
                        break;
                    }
                }
                Message::Close(_) => break,
                _ => {}
            }
        }
    };
    let mut frames = state.frames.clone();
    frames.mark_changed();
    let writer = async move {
        let mut frames_open = true;
        let mut last: Option<u64> = None;
        loop {
            tokio::select! {
                changed = frames.changed(), if frames_open => {
                    if changed.is_err() {
                        frames_open = false;
                        continue;
                    }
                    let frame = frames.borrow_and_update().clone();
                    if let Some(f) = frame.filter(|f| last.is_none_or(|l| f.frame_index > l)) {
                        last = Some(f.frame_index);
                        if sink.send(Message::Binary(f.bytes)).await.is_err() {
                            break;
                        }
                    }
                }
                reply = replies.recv() => match reply {
                    Some(text) => {
                        if sink.send(Message::Text(text.into())).await.is_err() {
                            break;
                        }
                    }
                    None => break,
                },
            }
        }
    };
    tokio::select! {
        _ = reader => {}
        _ = writer => {}
    }
}

#[derive(Debug)]
pub enum ServeError {
    Bind(SocketAddr, std::io::Error),
    Runtime(std::io::Error),
}

impl std::fmt::Display for ServeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServeError::Bind(a, e) => write!(f, "cannot bind {a}: {e}"),
            ServeError::Runtime(e) => write!(f, "cannot start runtime: {e}"),
        }
    }
}

impl std::error::Error for ServeError {}

/// A running server with its own runtime and frame bridge.
pub struct ServerHandle {
    addr: SocketAddr,
    frames: Arc<Handoff<Arc<FrameResult>>>,
    shutdown: Option<oneshot::Sender<()>>,
    server: Option<JoinHandle<()>>,
    bridge: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// Binds `opts.addr` and starts serving frames taken from `frames`.
    pub fn start(
        opts: ServerOptions,
        frames: Arc<Handoff<Arc<FrameResult>>>,
        control: Arc<Control>,
    ) -> Result<Self, ServeError> {
        let listener = std::net::TcpListener::bind(opts.addr).map_err(|e| ServeError::Bind(opts.addr, e))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| ServeError::Bind(opts.addr, e))?;
        let addr = listener.local_addr().map_err(|e| ServeError::Bind(opts.addr, e))?;
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(ServeError::Runtime)?;
        let (tx, rx) = watch::channel(None);
        let app = router(control, rx, opts.assets);
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let server = std::thread::spawn(move || {
            rt.block_on(async move {
                let served = match tokio::net::TcpListener::from_std(listener) {
                    Ok(listener) => {
                        axum::serve(listener, app)
                            .with_graceful_shutdown(async move {
                                let _ = stop_rx.await;
                            })
                            .await
                    }
                    Err(e) => Err(e),
                };
                if let Err(e) = served {
                    log::error!("server stopped: {e}");
                }
            });
            rt.shutdown_timeout(std::time::Duration::from_millis(200));
        });
        let source = frames.clone();
        let bridge = std::thread::spawn(move || {
            while let Some(result) = source.take() {
                tx.send_replace(Some(EncodedFrame::new(&result)));
            }
        });
        log::info!("serving on http://{addr}");
        Ok(ServerHandle {
            addr,
            frames,
            shutdown: Some(stop_tx),
            server: Some(server),
            bridge: Some(bridge),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(h) = self.server.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting clients and closes the frame handoff.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.frames.close();
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        for h in [self.server.take(), self.bridge.take()].into_iter().flatten() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}
