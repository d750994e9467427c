//! Chat-completion HTTP backend (OpenAI-compatible wire format).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionBackend, CompletionRequest, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable that holds the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_key_env() -> String {
    "RECMIND_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    60
}

const RETRIES: u32 = 3;
const BACKOFF_START: Duration = Duration::from_millis(500);

pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    agent: ureq::Agent,
    id: String,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            GatewayError::BackendUnavailable(format!("environment variable {} not set", config.api_key_env))
        })?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let id = format!("live:{}", config.model);
        Ok(Self {
            config,
            api_key,
            agent,
            id,
        })
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, Attempt> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("bad response body: {e}")))?;
        extract_text(&value).ok_or_else(|| Attempt::Fatal("response has no choices[0].message.content".into()))
    }
}

enum Attempt {
    Transient(String),
    Fatal(String),
}

pub(crate) fn extract_text(value: &serde_json::Value) -> Option<String> {
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

impl CompletionBackend for LiveBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut delay = BACKOFF_START;
        let mut last = String::new();
        for attempt in 0..=RETRIES {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(msg)) => return Err(GatewayError::BackendUnavailable(msg)),
                Err(Attempt::Transient(msg)) => {
                    log::warn!("completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(GatewayError::BackendUnavailable(last))
    }
}
