//! Generic HTTP backend for "multimodal generate" style JSON APIs.
//!
//! The wire schema is kept behind [`Transport`] and the body builder so the
//! rest of the crate never sees vendor specifics: one JSON document with the
//! model id, a text part, and inline base64 PNG parts. Transient failures
//! (timeouts, connection errors, 429, 5xx) are retried with exponential
//! backoff up to `max_attempts` total attempts; 401/403 fail immediately.

use std::io::Read;
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::json;

use super::limiter::RateLimiter;
use super::{Backend, BackendError, ModelRequest, ModelResponse};

#[derive(Debug, Clone, PartialEq)]
pub struct WireRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportFault {
    Timeout,
    Connection(String),
}

impl std::fmt::Display for TransportFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportFault::Timeout => f.write_str("timed out"),
            TransportFault::Connection(detail) => write!(f, "connection error: {detail}"),
        }
    }
}

/// One HTTP round trip. Swappable so tests can observe and script traffic.
pub trait Transport: Send + Sync {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportFault>;
}

/// Blocking transport over ureq.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl Transport for UreqTransport {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportFault> {
        let mut call = self.agent.post(&request.url);
        for (name, value) in &request.headers {
            call = call.set(name, value);
        }
        let read_body = |resp: ureq::Response| -> (u16, Vec<u8>) {
            let status = resp.status();
            let mut body = Vec::new();
            let _ = resp
                .into_reader()
                .take(16 * 1024 * 1024)
                .read_to_end(&mut body);
            (status, body)
        };
        match call.send_bytes(&request.body) {
            Ok(resp) => {
                let (status, body) = read_body(resp);
                Ok(WireResponse { status, body })
            }
            Err(ureq::Error::Status(_, resp)) => {
                let (status, body) = read_body(resp);
                Ok(WireResponse { status, body })
            }
            Err(ureq::Error::Transport(t)) => {
                let detail = t.to_string();
                if detail.contains("timed out") {
                    Err(TransportFault::Timeout)
                } else {
                    Err(TransportFault::Connection(detail))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model_id: String,
    /// Bearer token; when `None` the variable named by `api_key_env` is read.
    pub api_key: Option<String>,
    pub api_key_env: String,
    pub max_attempts: u32,
    pub timeout: Duration,
    pub requests_per_minute: Option<u32>,
    pub max_in_flight: usize,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model_id: String::new(),
            api_key: None,
            api_key_env: "SPECTRABENCH_API_KEY".into(),
            max_attempts: 3,
            timeout: Duration::from_secs(60),
            requests_per_minute: None,
            max_in_flight: 4,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(8),
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    transport: Box<dyn Transport>,
    limiter: Arc<RateLimiter>,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig, transport: Box<dyn Transport>) -> Self {
        let limiter = RateLimiter::new(config.max_in_flight, config.requests_per_minute);
        Self {
            config,
            transport,
            limiter,
        }
    }

    pub fn with_ureq(config: HttpBackendConfig) -> Self {
        let transport = Box::new(UreqTransport::new(config.timeout));
        Self::new(config, transport)
    }

    fn credentials(&self) -> Option<String> {
        self.config
            .api_key
            .clone()
            .or_else(|| std::env::var(&self.config.api_key_env).ok())
            .filter(|k| !k.is_empty())
    }

    /// Builds the wire request: JSON body with the model id, one text part,
    /// and one inline base64 part per PNG payload.
    pub fn wire_request(&self, request: &ModelRequest) -> WireRequest {
        let engine = base64::engine::general_purpose::STANDARD;
        let mut parts = vec![json!({ "text": request.instruction_text })];
        for image in &request.images {
            parts.push(json!({
                "inline_data": {
                    "mime_type": "image/png",
                    "data": engine.encode(image),
                }
            }));
        }
        let body = json!({
            "model": request.model_id,
            "contents": [{ "parts": parts }],
            "generation_config": {
                "temperature": request.params.temperature,
                "max_output_tokens": request.params.max_output_tokens,
            },
        });
        let mut headers = vec![("content-type".to_string(), "application/json".to_string())];
        if let Some(key) = self.credentials() {
            headers.push(("authorization".to_string(), format!("Bearer {key}")));
        }
        WireRequest {
            url: self.config.endpoint.clone(),
            headers,
            body: serde_json::to_vec(&body).expect("wire body serializes"),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.min(16);
        (self.config.backoff_base * factor).min(self.config.backoff_cap)
    }
}

/// Pulls the response text out of the wire body. Accepts the
/// candidates/content/parts shape or a bare top-level `"text"`; anything
/// else yields empty text, which downstream counts as a parse failure
/// rather than a transport error.
pub fn extract_text(body: &[u8]) -> String {
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(body) else {
        return String::new();
    };
    if let Some(parts) = value
        .pointer("/candidates/0/content/parts")
        .and_then(|p| p.as_array())
    {
        let mut text = String::new();
        for part in parts {
            if let Some(chunk) = part.get("text").and_then(|t| t.as_str()) {
                text.push_str(chunk);
            }
        }
        return text;
    }
    value
        .get("text")
        .and_then(|t| t.as_str())
        .map(str::to_string)
        .unwrap_or_default()
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl Backend for HttpBackend {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let _permit = self.limiter.acquire();
        let wire = self.wire_request(request);
        let start = Instant::now();
        let max_attempts = self.config.max_attempts.max(1);
        let mut last_detail = String::new();
        for attempt in 1..=max_attempts {
            self.limiter.pace();
            match self.transport.execute(&wire) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return Ok(ModelResponse {
                        text: extract_text(&resp.body),
                        latency_ms: start.elapsed().as_millis() as u64,
                        from_cache: false,
                    });
                }
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    return Err(BackendError::Auth {
                        status: resp.status,
                    });
                }
                Ok(resp) if retryable_status(resp.status) => {
                    last_detail = format!("status {}", resp.status);
                }
                Ok(resp) => {
                    return Err(BackendError::Transport {
                        attempts: attempt,
                        detail: format!("non-retryable status {}", resp.status),
                    });
                }
                Err(fault) => {
                    last_detail = fault.to_string();
                }
            }
            if attempt < max_attempts {
                std::thread::sleep(self.backoff(attempt - 1));
            }
        }
        Err(BackendError::Transport {
            attempts: max_attempts,
            detail: last_detail,
        })
    }

    fn identity(&self) -> String {
        format!("http:{}", self.config.model_id)
    }
}
