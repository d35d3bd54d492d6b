//! In-memory backends for tests and offline runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{Backend, BackendError, CacheKey, ModelRequest, ModelResponse};

/// Returns the same text for every request. Counts its calls so tests can
/// assert that wrappers short-circuited.
pub struct StaticBackend {
    text: String,
    calls: AtomicUsize,
}

impl StaticBackend {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for StaticBackend {
    fn send(&self, _request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(ModelResponse {
            text: self.text.clone(),
            latency_ms: 0,
            from_cache: false,
        })
    }

    fn identity(&self) -> String {
        "mock:static".into()
    }
}

/// Responds per request key from a pre-registered script; unknown requests
/// miss like a strict replay. This is how the echo mock answers each sample
/// with its own ground truth.
#[derive(Default)]
pub struct ScriptedBackend {
    responses: HashMap<CacheKey, String>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, request: &ModelRequest, text: impl Into<String>) {
        self.responses.insert(request.cache_key(), text.into());
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let key = request.cache_key();
        match self.responses.get(&key) {
            Some(text) => Ok(ModelResponse {
                text: text.clone(),
                latency_ms: 0,
                from_cache: false,
            }),
            None => Err(BackendError::ReplayMiss { key: key.hex() }),
        }
    }

    fn identity(&self) -> String {
        "mock:scripted".into()
    }
}

/// Always fails with a transport error; exercises the per-sample
/// skip-and-record policy.
pub struct FailingBackend {
    detail: String,
}

impl FailingBackend {
    pub fn new(detail: impl Into<String>) -> Self {
        Self {
            detail: detail.into(),
        }
    }
}

impl Backend for FailingBackend {
    fn send(&self, _request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        Err(BackendError::Transport {
            attempts: 1,
            detail: self.detail.clone(),
        })
    }

    fn identity(&self) -> String {
        "mock:failing".into()
    }
}
