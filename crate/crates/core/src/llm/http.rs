use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Backend, BackendError, BackendResponse, CompletionRequest, LlmError};
use crate::model::TokenUsage;

/// Backend configuration file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://host/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    /// Dotted path in the request body where the thinking budget goes, for
    /// providers that accept one; omitted when unset.
    #[serde(default)]
    pub thinking_budget_field: Option<String>,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
}

fn default_key_env() -> String {
    "EVOBASE_API_KEY".into()
}

fn default_timeout() -> f64 {
    600.0
}

impl HttpConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("backend config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| LlmError::Config(format!("backend config {}: {e}", path.display())))
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .map_err(|_| LlmError::Config(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, api_key, agent })
    }

    fn body(&self, request: &CompletionRequest<'_>) -> Value {
        let p = request.params;
        let mut body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": p.temperature,
            "top_p": p.top_p,
            "max_tokens": p.max_output_tokens,
        });
        if let Some(path) = &self.cfg.thinking_budget_field {
            set_dotted(&mut body, path, json!(p.thinking_budget_tokens));
        }
        body
    }
}

fn set_dotted(root: &mut Value, path: &str, value: Value) {
    let mut cur = root;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = match cur {
            Value::Object(m) => m,
            other => {
                *other = Value::Object(Map::new());
                other.as_object_mut().expect("just set")
            }
        };
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return;
        }
        cur = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
}

/// Text and usage from a chat-completions response. Reasoning tokens are
/// reported inside the completion count; they are split out here.
fn parse_response(v: &Value) -> Result<BackendResponse, BackendError> {
    let bad = |what: &str| BackendError::Permanent(format!("malformed response: missing {what}"));
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("choices[0].message.content"))?
        .to_string();
    let usage = v.get("usage").ok_or_else(|| bad("usage"))?;
    let prompt = usage.get("prompt_tokens").and_then(Value::as_u64).ok_or_else(|| bad("usage.prompt_tokens"))?;
    let completion = usage
        .get("completion_tokens")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("usage.completion_tokens"))?;
    let reasoning = usage
        .pointer("/completion_tokens_details/reasoning_tokens")
        .and_then(Value::as_u64)
        .unwrap_or(0)
        .min(completion);
    Ok(BackendResponse {
        text,
        usage: TokenUsage {
            tokens_in: prompt,
            tokens_out: completion - reasoning,
            thinking_tokens: reasoning,
        },
    })
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<BackendResponse, BackendError> {
        let url = format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'));
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send_json(self.body(request))
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(format!("reading body: {e}")))?;
        match status {
            200..=299 => {}
            408 | 429 | 500..=599 => return Err(BackendError::Transient(format!("HTTP {status}: {text}"))),
            _ => return Err(BackendError::Permanent(format!("HTTP {status}: {text}"))),
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Permanent(format!("response is not JSON: {e}")))?;
        parse_response(&v)
    }
}
