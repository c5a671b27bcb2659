//! Fixture-driven stand-in for all six service routes.
//!
//! A fixture file is one JSON document:
//!
//! ```json
//! {
//!   "images": {
//!     "boat.png": {
//!       "caption": "a boat on a river near a bridge",
//!       "conditional_caption": "a wooden boat in the center of a river, a stone bridge on the left",
//!       "objects": [{"name": "boat", "position": "center"}, {"name": "bridge", "position": "left"}],
//!       "scores": {"boat": 0.91, "bridge": 0.84},
//!       "conditional_scores": {},
//!       "default_score": 0.0,
//!       "raw": {"vqa": {"objects": [{"name": "boat"}]}}
//!     }
//!   },
//!   "default_image": null,
//!   "styles": {"realistic oil painting": "..."},
//!   "default_style": "...",
//!   "fuse": {"template": "{caption}, featuring {objects}, {style}"},
//!   "generate": {"prefix": "mock://generated/"},
//!   "latency_ms": {"generate": 10},
//!   "fail_first": {"caption": 1}
//! }
//! ```
//!
//! Every section is optional; a route whose section is missing answers
//! 404. `conditional_scores` apply when the zero-shot request carries the
//! image's conditional caption. `raw` replaces a route's reply verbatim.
//! `fail_first` makes the first `n` calls of a route answer 503; the
//! counters are shared by all images and guarded by a mutex.

use std::collections::BTreeMap;
use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::wire::*;
use super::{BackendError, ObjectLocation, Route, Transport};

#[derive(Debug, Error)]
pub enum MockError {
    #[error("fixture {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to bind mock server: {0}")]
    Bind(std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageFixture {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional_caption: Option<String>,
    #[serde(default)]
    pub objects: Vec<ObjectLocation>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub conditional_scores: BTreeMap<String, f64>,
    /// Score for labels absent from the score maps.
    #[serde(default)]
    pub default_score: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw: BTreeMap<Route, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuseFixture {
    /// Placeholders: `{caption}`, `{objects}`, `{style}`.
    pub template: String,
    /// Used instead of `template` when the request lists no objects.
    #[serde(default = "default_bare_template")]
    pub template_without_objects: String,
}

fn default_bare_template() -> String {
    "{caption}, {style}".to_string()
}

impl Default for FuseFixture {
    fn default() -> Self {
        FuseFixture {
            template: "{caption}, featuring {objects}, {style}".into(),
            template_without_objects: default_bare_template(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateFixture {
    pub prefix: String,
}

impl Default for GenerateFixture {
    fn default() -> Self {
        GenerateFixture {
            prefix: "mock://generated/".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockFixtures {
    #[serde(default)]
    pub images: BTreeMap<String, ImageFixture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_image: Option<ImageFixture>,
    #[serde(default)]
    pub styles: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_style: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuse: Option<FuseFixture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateFixture>,
    #[serde(default)]
    pub latency_ms: BTreeMap<Route, u64>,
    #[serde(default)]
    pub fail_first: BTreeMap<Route, u32>,
}

impl MockFixtures {
    pub fn parse(text: &str) -> Result<Self, MockError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MockError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MockError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixtures serialize")
    }

    /// The boat scene used throughout the docs and tests.
    pub fn boat_scene() -> Self {
        let boat = ImageFixture {
            caption: Some("a boat on a river near a bridge".into()),
            conditional_caption: Some(
                "a wooden boat in the center of a calm river with a stone bridge on the left".into(),
            ),
            objects: vec![
                ObjectLocation::new("boat", "center"),
                ObjectLocation::new("bridge", "left"),
            ],
            scores: BTreeMap::from([("boat".into(), 0.91), ("bridge".into(), 0.84)]),
            ..Default::default()
        };
        let blank = ImageFixture {
            caption: Some("an empty grey canvas".into()),
            ..Default::default()
        };
        MockFixtures {
            images: BTreeMap::from([("boat.png".into(), boat), ("blank.png".into(), blank)]),
            styles: BTreeMap::from([(
                "realistic oil painting".into(),
                "rich colours of the oil painting, filling the background with objects, visible impasto brushwork, warm natural light".into(),
            )]),
            default_style: Some("distinctive brushwork and a palette typical of the requested style".into()),
            fuse: Some(FuseFixture::default()),
            generate: Some(GenerateFixture::default()),
            ..Default::default()
        }
    }
}

type Reply = Result<Value, (u16, ErrorBody)>;

fn not_found(what: impl Into<String>) -> (u16, ErrorBody) {
    (404, ErrorBody::new("not_found", what))
}

fn bad_request(e: impl std::fmt::Display) -> (u16, ErrorBody) {
    (400, ErrorBody::new("bad_request", e.to_string()))
}

/// Deterministic reference for a generated image: the first 8 bytes of
/// `sha256(prompt || 0x00 || seed_le)` in hex, after `prefix`.
pub fn generated_ref(prefix: &str, prompt: &str, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    format!("{prefix}{}.png", hex::encode(&digest[..8]))
}

fn render_objects(objects: &[ObjectLocation]) -> String {
    objects
        .iter()
        .map(|o| format!("{} ({})", o.name, o.position))
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Answers route requests from fixtures. Shared by the in-process
/// transport and the HTTP server.
#[derive(Debug, Default)]
pub struct MockResponder {
    fixtures: MockFixtures,
    calls: Mutex<BTreeMap<Route, u32>>,
}

impl MockResponder {
    pub fn new(fixtures: MockFixtures) -> Self {
        MockResponder {
            fixtures,
            calls: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn fixtures(&self) -> &MockFixtures {
        &self.fixtures
    }

    pub fn latency(&self, route: Route) -> Duration {
        Duration::from_millis(self.fixtures.latency_ms.get(&route).copied().unwrap_or(0))
    }

    pub fn call_count(&self, route: Route) -> u32 {
        self.calls.lock().unwrap().get(&route).copied().unwrap_or(0)
    }

    fn image(&self, image_ref: &str) -> Result<&ImageFixture, (u16, ErrorBody)> {
        self.fixtures
            .images
            .get(image_ref)
            .or(self.fixtures.default_image.as_ref())
            .ok_or_else(|| not_found(format!("no fixture for image {image_ref:?}")))
    }

    pub fn respond(&self, route: Route, body: &Value) -> Reply {
        let n = {
            let mut calls = self.calls.lock().unwrap();
            let n = calls.entry(route).or_insert(0);
            *n += 1;
            *n
        };
        if n <= self.fixtures.fail_first.get(&route).copied().unwrap_or(0) {
            return Err((
                503,
                ErrorBody::new("injected_failure", format!("scripted failure {n} on {}", route.path())),
            ));
        }
        match route {
            Route::Caption => {
                let req: CaptionRequest = serde_json::from_value(body.clone()).map_err(bad_request)?;
                let img = self.image(&req.image_ref)?;
                if let Some(raw) = img.raw.get(&route) {
                    return Ok(raw.clone());
                }
                let caption = match req.condition {
                    Some(_) => img.conditional_caption.as_ref().or(img.caption.as_ref()),
                    None => img.caption.as_ref(),
                };
                let caption = caption.ok_or_else(|| not_found("no caption fixture"))?;
                Ok(json!({ "caption": caption }))
            }
            Route::Vqa => {
                let req: VqaRequest = serde_json::from_value(body.clone()).map_err(bad_request)?;
                let img = self.image(&req.image_ref)?;
                if let Some(raw) = img.raw.get(&route) {
                    return Ok(raw.clone());
                }
                Ok(json!({ "objects": img.objects }))
            }
            Route::ZeroShot => {
                let req: ZeroShotRequest = serde_json::from_value(body.clone()).map_err(bad_request)?;
                let img = self.image(&req.image_ref)?;
                if let Some(raw) = img.raw.get(&route) {
                    return Ok(raw.clone());
                }
                let conditioned = req.caption.is_some()
                    && req.caption == img.conditional_caption
                    && !img.conditional_scores.is_empty();
                let table = if conditioned {
                    &img.conditional_scores
                } else {
                    &img.scores
                };
                let scores: Vec<f64> = req
                    .labels
                    .iter()
                    .map(|l| table.get(l).copied().unwrap_or(img.default_score))
                    .collect();
                Ok(json!({ "scores": scores }))
            }
            Route::Elaborate => {
                let req: ElaborateRequest = serde_json::from_value(body.clone()).map_err(bad_request)?;
                let text = self
                    .fixtures
                    .styles
                    .get(&req.style)
                    .or(self.fixtures.default_style.as_ref())
                    .ok_or_else(|| not_found(format!("no elaboration for style {:?}", req.style)))?;
                Ok(json!({ "text": text }))
            }
            Route::Fuse => {
                let req: FuseRequest = serde_json::from_value(body.clone()).map_err(bad_request)?;
                let fx = self
                    .fixtures
                    .fuse
                    .as_ref()
                    .ok_or_else(|| not_found("no fuse fixture"))?;
                let template = if req.objects.is_empty() {
                    &fx.template_without_objects
                } else {
                    &fx.template
                };
                let text = template
                    .replace("{caption}", &req.caption)
                    .replace("{objects}", &render_objects(&req.objects))
                    .replace("{style}", &req.style_text);
                Ok(json!({ "text": text }))
            }
            Route::Generate => {
                let req: super::GenerationRequest = serde_json::from_value(body.clone()).map_err(bad_request)?;
                let fx = self
                    .fixtures
                    .generate
                    .as_ref()
                    .ok_or_else(|| not_found("no generate fixture"))?;
                Ok(json!({ "image_ref": generated_ref(&fx.prefix, &req.prompt, req.seed) }))
            }
        }
    }
}

/// In-process transport backed by a [`MockResponder`]. Latency is slept
/// on the calling thread; 5xx replies are retried like the HTTP client does.
#[derive(Debug, Clone)]
pub struct MockTransport {
    responder: Arc<MockResponder>,
    retries: u32,
}

impl MockTransport {
    pub fn new(fixtures: MockFixtures) -> Self {
        Self::from_responder(Arc::new(MockResponder::new(fixtures)))
    }

    pub fn from_responder(responder: Arc<MockResponder>) -> Self {
        MockTransport {
            responder,
            retries: super::http::DEFAULT_RETRIES,
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn responder(&self) -> &Arc<MockResponder> {
        &self.responder
    }
}

impl Transport for MockTransport {
    fn post(&self, route: Route, body: &Value) -> Result<Value, BackendError> {
        let mut last = None;
        for _ in 0..=self.retries {
            let latency = self.responder.latency(route);
            if !latency.is_zero() {
                std::thread::sleep(latency);
            }
            match self.responder.respond(route, body) {
                Ok(v) => return Ok(v),
                Err((status, err)) => {
                    let e = BackendError::Service {
                        route: route.path(),
                        status,
                        code: err.code,
                        message: err.message,
                    };
                    if status < 500 {
                        return Err(e);
                    }
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Loopback HTTP server serving a [`MockResponder`]. Stops on drop.
pub struct MockServer {
    addr: SocketAddr,
    responder: Arc<MockResponder>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for MockServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockServer").field("addr", &self.addr).finish()
    }
}

struct RouteReply(u16, Value);

impl IntoResponse for RouteReply {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.1)).into_response()
    }
}

async fn handle(responder: Arc<MockResponder>, route: Route, body: Bytes) -> RouteReply {
    let latency = responder.latency(route);
    if !latency.is_zero() {
        tokio::time::sleep(latency).await;
    }
    let parsed: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            let (status, err) = bad_request(e);
            return RouteReply(status, json!(err));
        }
    };
    match responder.respond(route, &parsed) {
        Ok(v) => RouteReply(200, v),
        Err((status, err)) => RouteReply(status, json!(err)),
    }
}

impl MockServer {
    /// Binds `127.0.0.1` on an ephemeral port and starts serving.
    pub fn start(fixtures: MockFixtures) -> Result<Self, MockError> {
        Self::start_on("127.0.0.1:0", fixtures)
    }

    pub fn start_on(addr: &str, fixtures: MockFixtures) -> Result<Self, MockError> {
        let listener = TcpListener::bind(addr).map_err(MockError::Bind)?;
        listener.set_nonblocking(true).map_err(MockError::Bind)?;
        let addr = listener.local_addr().map_err(MockError::Bind)?;
        let responder = Arc::new(MockResponder::new(fixtures));

        let mut app = Router::new();
        for route in Route::ALL {
            app = app.route(
                route.path(),
                post(move |State(r): State<Arc<MockResponder>>, body: Bytes| handle(r, route, body)),
            );
        }
        let app = app
            .fallback(|| async { RouteReply(404, json!(ErrorBody::new("not_found", "unknown route"))) })
            .with_state(responder.clone());

        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .map_err(MockError::Bind)?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name(format!("mock-server-{}", addr.port()))
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener).expect("registering listener");
                    let _ = axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await;
                });
                runtime.shutdown_timeout(Duration::from_millis(100));
            })
            .map_err(MockError::Bind)?;
        Ok(MockServer {
            addr,
            responder,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, MockError> {
        Self::start(MockFixtures::load(path)?)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn responder(&self) -> &Arc<MockResponder> {
        &self.responder
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
