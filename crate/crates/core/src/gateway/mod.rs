//! Completion gateway.
//!
//! Every model call made by the planners and by the tools goes through a
//! [`Gateway`]. A gateway wraps one [`CompletionBackend`] (live HTTP or
//! scripted), an optional response cache, and hands out per-episode
//! [`Session`]s that enforce the call budget and keep a call log.

mod cache;
mod live;
mod scripted;

use std::cell::RefCell;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::ResponseCache;
pub use live::{LiveBackend, LiveConfig};
pub use scripted::{Matcher, Script, ScriptEntry, ScriptedBackend};

/// Temperature used for tool-internal translation calls.
pub const TOOL_TEMPERATURE: f64 = 0.0;
/// Temperature used for planner thought generation.
pub const PLANNER_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("script exhausted: no entry matches prompt starting with {0:?}")]
    ScriptExhausted(String),
    #[error("call budget of {0} completions exceeded")]
    BudgetExceeded(u64),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache i/o: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub stop_sequences: Vec<String>,
    /// Caller label such as `planner.step` or `tool.sql.translate`.
    /// Not part of the cache key.
    pub tag: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: TOOL_TEMPERATURE,
            max_output_tokens: 512,
            stop_sequences: Vec::new(),
            tag: tag.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop_sequences.push(stop.into());
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
    pub backend_id: String,
    pub cached: bool,
    pub latency_ms: u64,
}

/// Something that turns a prompt into text.
pub trait CompletionBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

/// Stable content hash over everything that can change a completion.
/// The caller tag is excluded.
pub fn cache_key(request: &CompletionRequest, backend_id: &str) -> String {
    let mut hasher = Sha256::new();
    let mut field = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    };
    field(request.prompt.as_bytes());
    field(&request.temperature.to_bits().to_le_bytes());
    field(&request.max_output_tokens.to_le_bytes());
    field(&(request.stop_sequences.len() as u64).to_le_bytes());
    for stop in &request.stop_sequences {
        field(stop.as_bytes());
    }
    field(backend_id.as_bytes());
    hex::encode(hasher.finalize())
}

pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    cache: Option<ResponseCache>,
    raw_tool_output: bool,
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self {
            backend,
            cache: None,
            raw_tool_output: false,
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// "No-LLM" tool mode: tools skip their result-to-sentences conversion
    /// call and return stringified raw results instead.
    pub fn with_raw_tool_output(mut self, raw: bool) -> Self {
        self.raw_tool_output = raw;
        self
    }

    pub fn raw_tool_output(&self) -> bool {
        self.raw_tool_output
    }

    pub fn backend_id(&self) -> &str {
        self.backend.backend_id()
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        let started = Instant::now();
        let backend_id = self.backend.backend_id().to_string();
        let cacheable = request.temperature == 0.0;
        let key = match (&self.cache, cacheable) {
            (Some(_), true) => Some(cache_key(request, &backend_id)),
            _ => None,
        };
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(text) = cache.get(key) {
                return Ok(CompletionResponse {
                    text,
                    backend_id,
                    cached: true,
                    latency_ms: started.elapsed().as_millis() as u64,
                });
            }
        }
        let text = self.backend.complete(request)?;
        if let (Some(cache), Some(key)) = (&self.cache, key) {
            cache.put(key, text.clone())?;
        }
        Ok(CompletionResponse {
            text,
            backend_id,
            cached: false,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Opens a per-episode session. `max_calls` bounds the number of
    /// completions the episode may issue.
    pub fn session(&self, max_calls: Option<u64>) -> Session<'_> {
        Session {
            gateway: self,
            max_calls,
            log: RefCell::new(Vec::new()),
        }
    }
}

/// One logged completion inside a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tag: String,
    pub prompt: String,
    pub response: String,
    pub cached: bool,
}

/// Per-episode view of a gateway. Not shared between threads; each episode
/// owns its own session.
pub struct Session<'g> {
    gateway: &'g Gateway,
    max_calls: Option<u64>,
    log: RefCell<Vec<CallRecord>>,
}

impl<'g> Session<'g> {
    pub fn gateway(&self) -> &'g Gateway {
        self.gateway
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        if let Some(max) = self.max_calls {
            if self.calls() as u64 >= max {
                return Err(GatewayError::BudgetExceeded(max));
            }
        }
        let response = self.gateway.complete(request)?;
        self.log.borrow_mut().push(CallRecord {
            tag: request.tag.clone(),
            prompt: request.prompt.clone(),
            response: response.text.clone(),
            cached: response.cached,
        });
        Ok(response)
    }

    pub fn calls(&self) -> usize {
        self.log.borrow().len()
    }

    pub fn calls_tagged(&self, tag: &str) -> usize {
        self.log.borrow().iter().filter(|c| c.tag == tag).count()
    }

    pub fn log(&self) -> Vec<CallRecord> {
        self.log.borrow().clone()
    }

    pub fn prompts_tagged(&self, tag: &str) -> Vec<String> {
        self.log
            .borrow()
            .iter()
            .filter(|c| c.tag == tag)
            .map(|c| c.prompt.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_plus_two() -> Gateway {
        let script = Script::new(vec![ScriptEntry::exact("2+2", "4")]);
        Gateway::new(Arc::new(ScriptedBackend::new(script)))
    }

    #[test]
    fn scripted_echo_then_cached_repeat() {
        let gateway = two_plus_two().with_cache(ResponseCache::in_memory());
        let req = CompletionRequest::new("2+2", "test");
        let first = gateway.complete(&req).unwrap();
        assert_eq!(first.text, "4");
        assert!(!first.cached);
        let second = gateway.complete(&req).unwrap();
        assert_eq!(second.text, "4");
        assert!(second.cached);
    }

    #[test]
    fn unmatched_prompt_is_script_exhausted() {
        let gateway = two_plus_two();
        let err = gateway
            .complete(&CompletionRequest::new("3+3", "test"))
            .unwrap_err();
        assert!(matches!(err, GatewayError::ScriptExhausted(_)));
    }

    #[test]
    fn nonzero_temperature_bypasses_cache() {
        let script = Script::new(vec![ScriptEntry::contains("q", "a").max_uses(1)]);
        let gateway = Gateway::new(Arc::new(ScriptedBackend::new(script)))
            .with_cache(ResponseCache::in_memory());
        let req = CompletionRequest::new("q", "t").with_temperature(0.7);
        assert_eq!(gateway.complete(&req).unwrap().text, "a");
        assert!(gateway.complete(&req).is_err());
    }

    #[test]
    fn cache_key_properties() {
        let a = CompletionRequest::new("prompt", "planner.step");
        let b = CompletionRequest::new("prompt", "tool.sql.translate");
        assert_eq!(cache_key(&a, "x"), cache_key(&a.clone(), "x"));
        assert_eq!(cache_key(&a, "x"), cache_key(&b, "x"));
        let hot = a.clone().with_temperature(0.7);
        assert_ne!(cache_key(&a, "x"), cache_key(&hot, "x"));
        assert_ne!(cache_key(&a, "x"), cache_key(&a, "y"));
        let stopped = a.clone().with_stop("\n");
        assert_ne!(cache_key(&a, "x"), cache_key(&stopped, "x"));
    }

    #[test]
    fn invalid_requests_rejected() {
        let gateway = two_plus_two();
        assert!(matches!(
            gateway.complete(&CompletionRequest::new("", "t")),
            Err(GatewayError::InvalidRequest(_))
        ));
        assert!(matches!(
            gateway.complete(&CompletionRequest::new("2+2", "t").with_temperature(1.5)),
            Err(GatewayError::InvalidRequest(_))
        ));
        assert!(matches!(
            gateway.complete(&CompletionRequest::new("2+2", "t").with_max_output_tokens(0)),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[test]
    fn session_enforces_call_budget() {
        let gateway = two_plus_two();
        let session = gateway.session(Some(2));
        let req = CompletionRequest::new("2+2", "t");
        session.complete(&req).unwrap();
        session.complete(&req).unwrap();
        assert_eq!(
            session.complete(&req).unwrap_err(),
            GatewayError::BudgetExceeded(2)
        );
        assert_eq!(session.calls(), 2);
    }
}
