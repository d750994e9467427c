//! Search providers.
//!
//! HTTP contract: `GET <endpoint>?q=<question>` returns a JSON document,
//! passed to the conversion prompt as-is. When `api_key_env` is set the key
//! is sent as `api_key=<key>`. Any transport error, timeout or non-2xx
//! status is `SearchUnavailable`.
//!
//! Fixture files are one JSON object mapping normalized questions to
//! payloads. A question with no entry yields an empty payload.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ToolError;

pub trait SearchProvider: Send + Sync {
    fn search(&self, question: &str) -> Result<Value, ToolError>;
}

/// Lower-case, collapse whitespace, drop trailing `?`, `.` and `!`.
pub fn normalize_question(question: &str) -> String {
    let lowered = question.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['?', '.', '!', ' ']).to_string()
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSearchProvider {
    entries: HashMap<String, Value>,
}

impl FixtureSearchProvider {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: HashMap<String, Value> = serde_json::from_str(text)?;
        Ok(Self {
            entries: raw.into_iter().map(|(k, v)| (normalize_question(&k), v)).collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ToolError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ToolError::SearchUnavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ToolError::SearchUnavailable(format!("{}: {e}", path.display())))
    }

    pub fn insert(&mut self, question: &str, payload: Value) {
        self.entries.insert(normalize_question(question), payload);
    }
}

impl SearchProvider for FixtureSearchProvider {
    fn search(&self, question: &str) -> Result<Value, ToolError> {
        Ok(self
            .entries
            .get(&normalize_question(question))
            .cloned()
            .unwrap_or(Value::Null))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpSearchConfig {
    pub endpoint: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    10
}

pub struct HttpSearchProvider {
    config: HttpSearchConfig,
    agent: ureq::Agent,
}

impl HttpSearchProvider {
    pub fn new(config: HttpSearchConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Self { config, agent }
    }
}

impl SearchProvider for HttpSearchProvider {
    fn search(&self, question: &str) -> Result<Value, ToolError> {
        let unavailable = |e: String| ToolError::SearchUnavailable(e);
        let mut request = self.agent.get(&self.config.endpoint).query("q", question);
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var).map_err(|_| unavailable(format!("{var} not set")))?;
            request = request.query("api_key", &key);
        }
        let mut response = request.call().map_err(|e| unavailable(e.to_string()))?;
        response
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| unavailable(e.to_string()))
    }
}
