//! HTTP client for an external embedding service.

use std::io;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use hydra_core::embed::EmbedError;
use hydra_core::{Embedding, EmbeddingProvider, FunctionRecord, EMBEDDING_DIM};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    id: &'a str,
    code: &'a str,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    id: String,
    model: String,
    vector: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    error: String,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Sends `{"id","code"}` to `<endpoint>/embed` and accepts the returned vector
/// unchanged after shape and finiteness checks.
#[derive(Debug)]
pub struct RemoteEmbedder {
    url: String,
    agent: ureq::Agent,
    permits: Permits,
    model: Mutex<Option<String>>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, timeout: Duration, max_in_flight: usize) -> Self {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/embed") {
            base.to_string()
        } else {
            format!("{base}/embed")
        };
        Self {
            url,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            permits: Permits::new(max_in_flight),
            model: Mutex::new(None),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Model name reported by the most recent successful response.
    pub fn model(&self) -> Option<String> {
        self.model.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn request(&self, id: &str, code: &str) -> Result<String, EmbedError> {
        let body = serde_json::to_string(&EmbedRequest { id, code }).map_err(|e| EmbedError::BridgeBadResponse(e.to_string()))?;
        let _permit = self.permits.acquire();
        let resp = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json")
            .send_string(&body);
        match resp {
            Ok(r) => r.into_string().map_err(|e| map_io(&e)),
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                let msg = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
                Err(EmbedError::BridgeBadResponse(format!("HTTP {code}: {msg}")))
            }
            Err(ureq::Error::Transport(t)) => Err(map_transport(&t)),
        }
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock)
}

fn map_io(e: &io::Error) -> EmbedError {
    if is_timeout(e) {
        EmbedError::Timeout
    } else {
        EmbedError::BridgeUnreachable(e.to_string())
    }
}

fn map_transport(t: &ureq::Transport) -> EmbedError {
    let mut src: Option<&(dyn std::error::Error + 'static)> = std::error::Error::source(t);
    while let Some(e) = src {
        if let Some(io) = e.downcast_ref::<io::Error>() {
            if is_timeout(io) {
                return EmbedError::Timeout;
            }
        }
        src = e.source();
    }
    EmbedError::BridgeUnreachable(t.to_string())
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> String {
        match self.model() {
            Some(m) => format!("remote:{m}"),
            None => format!("remote:{}", self.url),
        }
    }

    fn embed(&self, func: &FunctionRecord) -> Result<Embedding, EmbedError> {
        let text = self.request(&func.id, &func.normalized_source)?;
        let resp: EmbedResponse =
            serde_json::from_str(&text).map_err(|e| EmbedError::BridgeBadResponse(format!("invalid body: {e}")))?;
        if resp.id != func.id {
            return Err(EmbedError::BridgeBadResponse(format!(
                "response id `{}` does not echo request id `{}`",
                resp.id, func.id
            )));
        }
        if resp.vector.len() != EMBEDDING_DIM {
            return Err(EmbedError::BridgeBadResponse(format!(
                "expected {EMBEDDING_DIM} values, got {}",
                resp.vector.len()
            )));
        }
        let e = Embedding::new(resp.vector, format!("remote:{}", resp.model), func.id.clone())
            .map_err(|e| EmbedError::BridgeBadResponse(e.to_string()))?;
        *self.model.lock().unwrap_or_else(|e| e.into_inner()) = Some(resp.model);
        Ok(e)
    }
}
