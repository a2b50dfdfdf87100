//! Optional text-generation client over a JSON chat endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const ENDPOINT_VAR: &str = "HESITATOR_LLM_ENDPOINT";
pub const KEY_VAR: &str = "HESITATOR_LLM_KEY";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("provider not configured: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub trait TextGenerator: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub model: Option<String>,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings { timeout_secs: default_timeout(), retries: default_retries(), model: None }
    }
}

/// Sends `{"model", "messages": [{"role": "user", "content": prompt}]}`
/// and reads `choices[0].message.content`, `choices[0].text` or `text`.
pub struct HttpTextClient {
    endpoint: String,
    key: Option<String>,
    settings: LlmSettings,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpTextClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTextClient").field("endpoint", &self.endpoint).field("settings", &self.settings).finish()
    }
}

impl HttpTextClient {
    pub fn new(endpoint: impl Into<String>, key: Option<String>, settings: LlmSettings) -> Result<Self, ProviderError> {
        let endpoint = endpoint.into();
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(ProviderError::Config(format!("endpoint `{endpoint}` must be an http(s) URL")));
        }
        if !(settings.timeout_secs.is_finite() && settings.timeout_secs > 0.0) {
            return Err(ProviderError::Config("timeout must be positive".into()));
        }
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs_f64(settings.timeout_secs)).build();
        Ok(HttpTextClient { endpoint, key, settings, agent })
    }

    pub fn from_env(settings: LlmSettings) -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| ProviderError::Config(format!("set {ENDPOINT_VAR} to the chat endpoint URL")))?;
        let key = std::env::var(KEY_VAR).ok().filter(|s| !s.is_empty());
        HttpTextClient::new(endpoint, key, settings)
    }

    fn request_once(&self, body: &Value) -> Result<String, ProviderError> {
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(k) = &self.key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let resp = match req.send_json(body.clone()) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                return Err(ProviderError::Transport(format!("status {code}: {}", text.trim())));
            }
            Err(e) => return Err(ProviderError::Transport(e.to_string())),
        };
        let v: Value = resp.into_json().map_err(|e| ProviderError::Protocol(format!("invalid JSON body: {e}")))?;
        extract_text(&v).ok_or_else(|| ProviderError::Protocol("response carries no completion text".into()))
    }
}

fn extract_text(v: &Value) -> Option<String> {
    let choice = v.get("choices").and_then(|c| c.get(0));
    choice
        .and_then(|c| c.pointer("/message/content"))
        .or_else(|| choice.and_then(|c| c.get("text")))
        .or_else(|| v.get("text"))
        .and_then(Value::as_str)
        .map(str::to_owned)
}

impl TextGenerator for HttpTextClient {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut body = json!({ "messages": [{ "role": "user", "content": prompt }] });
        if let Some(m) = &self.settings.model {
            body["model"] = Value::String(m.clone());
        }
        let mut last = ProviderError::Transport("no attempt made".into());
        for _ in 0..=self.settings.retries {
            match self.request_once(&body) {
                Ok(text) => return Ok(text),
                Err(e @ ProviderError::Transport(_)) => last = e,
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }
}
