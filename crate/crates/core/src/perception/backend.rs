//! Model backends: an OpenAI-compatible HTTP client, a replaying mock and an offline stub.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::cache::DecodeParams;
use crate::dsl::Builtin;

/// An image attached to a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInput {
    pub digest: String,
    pub path: PathBuf,
}

/// What a request asks for. Backends that only see text may ignore it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestKind {
    GroundObjects,
    GroundProperties,
    GroundActions,
    SceneObjects,
    SceneActions,
    Size { predicate: String, object: String, property: Option<String> },
}

impl RequestKind {
    pub fn label(&self) -> &'static str {
        match self {
            RequestKind::GroundObjects => "ground_objects",
            RequestKind::GroundProperties => "ground_properties",
            RequestKind::GroundActions => "ground_actions",
            RequestKind::SceneObjects => "scene_objects",
            RequestKind::SceneActions => "scene_actions",
            RequestKind::Size { .. } => "size",
        }
    }

    pub fn size(predicate: Builtin, object: &str, property: Option<&str>) -> Self {
        RequestKind::Size {
            predicate: predicate.name().to_string(),
            object: object.to_string(),
            property: property.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlmRequest {
    pub kind: RequestKind,
    pub prompt: String,
    pub images: Vec<ImageInput>,
    /// Retry ordinal; part of the digest so every attempt is cached separately.
    pub attempt: u32,
}

impl VlmRequest {
    /// Digest over prompt, image digests and attempt. Model and decoding are excluded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.prompt.as_bytes());
        for img in &self.images {
            h.update([0]);
            h.update(img.digest.as_bytes());
        }
        h.update([0]);
        h.update(self.attempt.to_le_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("authentication failed (HTTP {0})")]
    Auth(u16),
    #[error("network error: {0}")]
    Network(String),
    #[error("API key variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("malformed endpoint response: {0}")]
    BadResponse(String),
    #[error("cannot read image {0}")]
    Image(String),
    #[error("network access is disabled")]
    Offline,
    #[error("no canned response for request {0}")]
    MockMiss(String),
}

pub trait VlmBackend: Send + Sync {
    fn complete(&self, request: &VlmRequest, model: &str, decode: &DecodeParams) -> Result<String, TransportError>;

    /// Number of calls that reached the backend.
    fn calls(&self) -> u64;
}

/// Client for `POST {base_url}/chat/completions`.
pub struct HttpBackend {
    base_url: String,
    api_key_env: String,
    max_retries: u32,
    retry_delay: Duration,
    agent: ureq::Agent,
    calls: AtomicU64,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key_env: &str, timeout: Duration, max_retries: u32) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key_env: api_key_env.to_string(),
            max_retries,
            retry_delay: Duration::from_millis(500),
            agent,
            calls: AtomicU64::new(0),
        }
    }

    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }

    fn body(&self, request: &VlmRequest, model: &str, decode: &DecodeParams) -> Result<serde_json::Value, TransportError> {
        let mut content = vec![json!({"type": "text", "text": request.prompt})];
        for img in &request.images {
            let bytes = std::fs::read(&img.path).map_err(|e| TransportError::Image(format!("{}: {e}", img.path.display())))?;
            let mime = match img.path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                Some("jpg" | "jpeg") => "image/jpeg",
                Some("gif") => "image/gif",
                Some("webp") => "image/webp",
                _ => "image/png",
            };
            let data = base64::engine::general_purpose::STANDARD.encode(bytes);
            content.push(json!({"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}}));
        }
        let mut body = json!({
            "model": model,
            "messages": [{"role": "user", "content": content}],
            "temperature": decode.effective_temperature(),
        });
        if let Some(seed) = decode.seed {
            body["seed"] = json!(seed);
        }
        Ok(body)
    }

    fn send_once(&self, key: &str, body: &serde_json::Value) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let url = format!("{}/chat/completions", self.base_url);
        let mut response = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| TransportError::Network(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(TransportError::Auth(status)),
            _ => return Err(TransportError::Http { status, body: text.chars().take(500).collect() }),
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportError::BadResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError::BadResponse("missing choices[0].message.content".into()))
    }
}

impl VlmBackend for HttpBackend {
    fn complete(&self, request: &VlmRequest, model: &str, decode: &DecodeParams) -> Result<String, TransportError> {
        let key = std::env::var(&self.api_key_env).map_err(|_| TransportError::MissingApiKey(self.api_key_env.clone()))?;
        let body = self.body(request, model, decode)?;
        let mut attempt = 0;
        loop {
            match self.send_once(&key, &body) {
                Ok(text) => return Ok(text),
                Err(e @ (TransportError::Auth(_) | TransportError::BadResponse(_))) => return Err(e),
                Err(TransportError::Http { status, body }) if status < 500 && status != 429 => {
                    return Err(TransportError::Http { status, body })
                }
                Err(e) if attempt >= self.max_retries => return Err(e),
                Err(e) => {
                    attempt += 1;
                    log::warn!("request failed ({e}), retry {attempt}/{}", self.max_retries);
                    std::thread::sleep(self.retry_delay * attempt);
                }
            }
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// One canned response, stored as `<digest>.json` in a mock directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockResponse {
    pub digest: String,
    #[serde(flatten)]
    pub kind: RequestKind,
    pub response: String,
}

/// Replays canned responses keyed by request digest.
#[derive(Debug, Default)]
pub struct MockBackend {
    responses: HashMap<String, String>,
    calls: AtomicU64,
}

impl MockBackend {
    pub fn new(responses: HashMap<String, String>) -> Self {
        MockBackend { responses, calls: AtomicU64::new(0) }
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut responses = HashMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let doc: MockResponse = serde_json::from_str(&std::fs::read_to_string(&path)?)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
                responses.insert(doc.digest, doc.response);
            }
        }
        Ok(MockBackend::new(responses))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl VlmBackend for MockBackend {
    fn complete(&self, request: &VlmRequest, _model: &str, _decode: &DecodeParams) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let digest = request.digest();
        self.responses.get(&digest).cloned().ok_or(TransportError::MockMiss(digest))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Refuses every call; used to prove a stage runs from cache alone.
#[derive(Debug, Default)]
pub struct OfflineBackend {
    attempts: AtomicU64,
}

impl VlmBackend for OfflineBackend {
    fn complete(&self, _request: &VlmRequest, _model: &str, _decode: &DecodeParams) -> Result<String, TransportError> {
        self.attempts.fetch_add(1, Ordering::Relaxed);
        Err(TransportError::Offline)
    }

    fn calls(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }
}
