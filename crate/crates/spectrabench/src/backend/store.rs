//! Content-addressed fixture storage: one JSON file per request key.
//!
//! The same layout serves three roles: [`RecordingBackend`] persists live
//! responses, [`ReplayBackend`] serves them back deterministically, and
//! [`CachingBackend`] deduplicates identical requests. Writes go through a
//! temp file plus rename so concurrent workers never observe a torn fixture.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, Backend, BackendError, CacheKey, ModelRequest, ModelResponse};

/// What RecordingBackend persists per request: the key, a diffable request
/// summary, and the response text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub key: String,
    pub request: RequestSummary,
    pub response: StoredResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub model_id: String,
    pub temperature: f32,
    pub max_output_tokens: u32,
    pub instruction_sha256: String,
    pub image_sha256s: Vec<String>,
    pub instruction_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub text: String,
    pub latency_ms: u64,
}

impl Fixture {
    pub fn capture(request: &ModelRequest, response: &ModelResponse) -> Self {
        Fixture {
            key: request.cache_key().hex(),
            request: RequestSummary {
                model_id: request.model_id.clone(),
                temperature: request.params.temperature,
                max_output_tokens: request.params.max_output_tokens,
                instruction_sha256: sha256_hex(request.instruction_text.as_bytes()),
                image_sha256s: request.images.iter().map(|i| sha256_hex(i)).collect(),
                instruction_text: request.instruction_text.clone(),
            },
            response: StoredResponse {
                text: response.text.clone(),
                latency_ms: response.latency_ms,
            },
        }
    }

    pub fn from_json_str(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

pub fn fixture_path(dir: &Path, key: &CacheKey) -> PathBuf {
    dir.join(format!("{}.json", key.hex()))
}

static WRITE_SEQ: AtomicU64 = AtomicU64::new(0);

/// Write-then-rename so readers only ever see whole files.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), BackendError> {
    let storage_err = |p: &Path, detail: String| BackendError::Storage {
        path: p.display().to_string(),
        detail,
    };
    let parent = path
        .parent()
        .ok_or_else(|| storage_err(path, "no parent directory".into()))?;
    std::fs::create_dir_all(parent).map_err(|e| storage_err(parent, e.to_string()))?;
    let seq = WRITE_SEQ.fetch_add(1, Ordering::Relaxed);
    let tmp = parent.join(format!(
        ".tmp.{}.{}.{}",
        std::process::id(),
        seq,
        path.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("fixture")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| storage_err(&tmp, e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        storage_err(path, e.to_string())
    })?;
    Ok(())
}

fn write_fixture(dir: &Path, fixture: &Fixture) -> Result<PathBuf, BackendError> {
    let key = CacheKey(parse_hex(&fixture.key));
    let path = fixture_path(dir, &key);
    let mut bytes = serde_json::to_vec_pretty(fixture).expect("fixture serializes");
    bytes.push(b'\n');
    atomic_write(&path, &bytes)?;
    Ok(path)
}

fn parse_hex(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, chunk) in hex.as_bytes().chunks(2).take(32).enumerate() {
        let hi = (chunk[0] as char).to_digit(16).unwrap_or(0) as u8;
        let lo = chunk
            .get(1)
            .and_then(|c| (*c as char).to_digit(16))
            .unwrap_or(0) as u8;
        out[i] = (hi << 4) | lo;
    }
    out
}

fn read_fixture(dir: &Path, key: &CacheKey) -> Result<Option<Fixture>, BackendError> {
    let path = fixture_path(dir, key);
    let json = match std::fs::read_to_string(&path) {
        Ok(json) => json,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => {
            return Err(BackendError::Storage {
                path: path.display().to_string(),
                detail: e.to_string(),
            })
        }
    };
    Fixture::from_json_str(&json)
        .map(Some)
        .map_err(|e| BackendError::Storage {
            path: path.display().to_string(),
            detail: format!("corrupt fixture: {e}"),
        })
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Strict read-only backend over a fixture directory: any request without a
/// recorded fixture is a [`BackendError::ReplayMiss`].
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Backend for ReplayBackend {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let key = request.cache_key();
        match read_fixture(&self.dir, &key)? {
            Some(fixture) => Ok(ModelResponse {
                text: fixture.response.text,
                latency_ms: fixture.response.latency_ms,
                from_cache: true,
            }),
            None => Err(BackendError::ReplayMiss { key: key.hex() }),
        }
    }

    fn identity(&self) -> String {
        "replay".into()
    }
}

// ---------------------------------------------------------------------------
// Record
// ---------------------------------------------------------------------------

/// Forwards to an inner backend and persists every successful response as a
/// replayable fixture. A failed write never discards the inner response; it
/// is kept observable through [`RecordingBackend::storage_errors`].
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
    storage_errors: Mutex<Vec<String>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            storage_errors: Mutex::new(Vec::new()),
        }
    }

    /// Storage failures accumulated so far, oldest first.
    pub fn storage_errors(&self) -> Vec<String> {
        self.storage_errors.lock().unwrap().clone()
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let response = self.inner.send(request)?;
        let fixture = Fixture::capture(request, &response);
        if let Err(err) = write_fixture(&self.dir, &fixture) {
            let detail = err.to_string();
            eprintln!("warning: fixture not recorded: {detail}");
            self.storage_errors.lock().unwrap().push(detail);
        }
        Ok(response)
    }

    fn identity(&self) -> String {
        format!("record({})", self.inner.identity())
    }
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

/// Disk-backed response cache keyed by request digest. Hits are served with
/// `from_cache = true` and never touch the inner backend.
pub struct CachingBackend<B> {
    inner: B,
    dir: PathBuf,
    storage_errors: Mutex<Vec<String>>,
}

impl<B: Backend> CachingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
            storage_errors: Mutex::new(Vec::new()),
        }
    }

    pub fn storage_errors(&self) -> Vec<String> {
        self.storage_errors.lock().unwrap().clone()
    }
}

impl<B: Backend> Backend for CachingBackend<B> {
    fn send(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let key = request.cache_key();
        if let Some(fixture) = read_fixture(&self.dir, &key)? {
            return Ok(ModelResponse {
                text: fixture.response.text,
                latency_ms: fixture.response.latency_ms,
                from_cache: true,
            });
        }
        let start = Instant::now();
        let mut response = self.inner.send(request)?;
        if response.latency_ms == 0 {
            response.latency_ms = start.elapsed().as_millis() as u64;
        }
        let fixture = Fixture::capture(request, &response);
        if let Err(err) = write_fixture(&self.dir, &fixture) {
            let detail = err.to_string();
            eprintln!("warning: cache entry not written: {detail}");
            self.storage_errors.lock().unwrap().push(detail);
        }
        Ok(response)
    }

    fn identity(&self) -> String {
        format!("cached({})", self.inner.identity())
    }
}
