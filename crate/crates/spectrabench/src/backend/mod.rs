//! Vision-language backend dispatch.
//!
//! A [`Backend`] takes a [`ModelRequest`] (instruction text plus PNG image
//! payloads) and returns the model's raw text. Implementations: a generic
//! HTTP backend with retry and rate limiting, a strict replay backend over
//! recorded fixtures, recording and caching wrappers, and in-memory mocks
//! for tests and offline runs. Requests are content-addressed by a SHA-256
//! [`CacheKey`] so fixtures and cache entries are shared across identical
//! requests.

mod http;
mod limiter;
mod mock;
mod store;

pub use http::{
    HttpBackend, HttpBackendConfig, Transport, TransportFault, UreqTransport, WireRequest,
    WireResponse,
};
pub use limiter::{InFlightPermit, RateLimiter};
pub use mock::{FailingBackend, ScriptedBackend, StaticBackend};
pub use store::{
    CachingBackend, Fixture, RecordingBackend, ReplayBackend, RequestSummary, StoredResponse,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failed after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("authentication rejected with status {status}")]
    Auth { status: u16 },
    #[error("no fixture recorded for key {key}")]
    ReplayMiss { key: String },
    #[error("fixture storage failed at {path}: {detail}")]
    Storage { path: String, detail: String },
}

/// Sampling controls forwarded to the model. Defaults favor determinism:
/// temperature 0 and a generous token budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f32,
    pub max_output_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 8192,
        }
    }
}

/// One inference request: ordered PNG payloads plus the instruction text.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub model_id: String,
    pub instruction_text: String,
    pub images: Vec<Vec<u8>>,
    pub params: GenerationParams,
}

impl ModelRequest {
    /// Content digest over every request byte: model id, generation params,
    /// instruction text, and all image payloads, length-framed so that no
    /// two distinct requests serialize identically.
    pub fn cache_key(&self) -> CacheKey {
        let mut hasher = Sha256::new();
        hasher.update(b"spectrabench.request.v1");
        let frame = |hasher: &mut Sha256, bytes: &[u8]| {
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        };
        frame(&mut hasher, self.model_id.as_bytes());
        hasher.update(self.params.temperature.to_le_bytes());
        hasher.update(self.params.max_output_tokens.to_le_bytes());
        frame(&mut hasher, self.instruction_text.as_bytes());
        hasher.update((self.images.len() as u64).to_le_bytes());
        for image in &self.images {
            frame(&mut hasher, image);
        }
        CacheKey(hasher.finalize().into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResponse {
    pub text: String,
    pub latency_ms: u64,
    pub from_cache: bool,
}

/// SHA-256 digest identifying one request's exact bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(pub [u8; 32]);

impl CacheKey {
    pub fn hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

/// A model endpoint. Implementations must be callable from multiple worker
/// threads at once.
pub trait Backend: Send + Sync {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError>;

    /// Short stable description for reports ("http:<model-id>", "replay", ...).
    fn identity(&self) -> String;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        (**self).send(request)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
