//! A local chat-completion endpoint for offline runs and tests.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::prompt::PromptTemplate;
use crate::harness::mock_label;
use crate::schema::LabelSchema;
use crate::{Error, Result};

/// Maps a prompt to the reply content.
pub type Responder = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// Answers `{"label": ...}` with the mock teacher applied to the document
/// text recovered from the prompt.
pub fn keyword_responder(schema: LabelSchema, seed: u64) -> Responder {
    let template = PromptTemplate::new(&schema);
    Arc::new(move |prompt: &str| {
        let text = template.extract_text(prompt).unwrap_or(prompt);
        json!({ "label": mock_label(text, &schema, seed).id }).to_string()
    })
}

#[derive(Debug, Clone, Default)]
pub struct MockServerConfig {
    /// Delay before every answer.
    pub delay: Duration,
    /// The first `fail_first` requests get HTTP 503.
    pub fail_first: usize,
    /// Expected bearer token; any token is accepted when unset.
    pub api_key: Option<String>,
}

#[derive(Debug, Default)]
pub struct MockStats {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockStats {
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

#[derive(Clone)]
struct AppState {
    responder: Responder,
    config: MockServerConfig,
    stats: Arc<MockStats>,
}

struct InFlight(Arc<MockStats>);

impl InFlight {
    fn enter(stats: &Arc<MockStats>) -> Self {
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Self(stats.clone())
    }
}

impl Drop for InFlight {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn completions(State(state): State<AppState>, headers: axum::http::HeaderMap, Json(body): Json<Value>) -> Response {
    let n = state.stats.requests.fetch_add(1, Ordering::SeqCst);
    let _guard = InFlight::enter(&state.stats);
    if let Some(key) = &state.config.api_key {
        let expected = format!("Bearer {key}");
        if headers.get("authorization").and_then(|v| v.to_str().ok()) != Some(expected.as_str()) {
            return StatusCode::UNAUTHORIZED.into_response();
        }
    }
    if !state.config.delay.is_zero() {
        tokio::time::sleep(state.config.delay).await;
    }
    if n < state.config.fail_first {
        return (StatusCode::SERVICE_UNAVAILABLE, "try again").into_response();
    }
    let Some(prompt) = body["messages"][0]["content"].as_str() else {
        return (StatusCode::BAD_REQUEST, "missing messages[0].content").into_response();
    };
    let content = (state.responder)(prompt);
    Json(json!({
        "id": format!("mock-{n}"),
        "object": "chat.completion",
        "model": body["model"],
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }],
        "usage": {
            "prompt_tokens": prompt.len().div_ceil(4),
            "completion_tokens": content.len().div_ceil(4),
            "total_tokens": prompt.len().div_ceil(4) + content.len().div_ceil(4)
        }
    }))
    .into_response()
}

pub struct MockServer {
    addr: SocketAddr,
    stats: Arc<MockStats>,
    shutdown: Option<oneshot::Sender<()>>,
    handle: JoinHandle<()>,
}

impl MockServer {
    /// Binds an ephemeral port on localhost and starts serving.
    pub async fn start(responder: Responder, config: MockServerConfig) -> Result<Self> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
            .await
            .map_err(|e| Error::io("127.0.0.1:0", e))?;
        let addr = listener.local_addr().map_err(|e| Error::io("127.0.0.1:0", e))?;
        let stats = Arc::new(MockStats::default());
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .with_state(AppState {
                responder,
                config,
                stats: stats.clone(),
            });
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            stats,
            shutdown: Some(tx),
            handle,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Value for `TeacherConfig::base_url`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn stats(&self) -> &MockStats {
        &self.stats
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.handle).await;
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
