use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::types::Setup;

use super::{LlmError, MockProvider, ModelSpec, ProviderKind};

/// Bookkeeping that travels with a request but is never sent to a provider.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub targets: Vec<String>,
    pub setup: Option<Setup>,
    pub pass_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: usize,
    pub meta: RequestMeta,
}

pub trait Provider: Send + Sync {
    /// Returns the assistant message text.
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError>;
}

pub fn provider_for(spec: &ModelSpec) -> Result<Arc<dyn Provider>, LlmError> {
    spec.validate()?;
    Ok(match spec.kind {
        ProviderKind::Mock => Arc::new(MockProvider::default()),
        ProviderKind::Http => Arc::new(HttpProvider::new(spec)?),
    })
}

/// Chat-completions-compatible HTTP endpoint.
pub struct HttpProvider {
    spec: ModelSpec,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    /// Reads the key from `spec.auth_env`; a declared but unset variable is a
    /// configuration error.
    pub fn new(spec: &ModelSpec) -> Result<Self, LlmError> {
        let api_key = match &spec.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .ok()
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| LlmError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(600)))
            .build()
            .into();
        Ok(HttpProvider {
            spec: spec.clone(),
            api_key,
            agent,
        })
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let mut body = json!({
            "model": self.spec.wire_model(),
            "messages": [{"role": "user", "content": req.prompt}],
            "max_tokens": req.max_output_tokens,
        });
        if self.spec.send_temperature {
            body["temperature"] = json!(req.temperature);
        }
        body
    }
}

fn is_context_overflow(body: &str) -> bool {
    let b = body.to_ascii_lowercase();
    b.contains("context_length_exceeded") || b.contains("maximum context length") || b.contains("context window")
}

impl Provider for HttpProvider {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let mut call = self.agent.post(&self.spec.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send(self.body(req).to_string())
            .map_err(|e| LlmError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transient(e.to_string()))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err(LlmError::Transient(format!("status {status}"))),
            _ if is_context_overflow(&text) => {
                return Err(LlmError::ContextOverflow {
                    model: self.spec.name.clone(),
                    needed: 0,
                    window: self.spec.context_window,
                })
            }
            _ => return Err(LlmError::Provider { status, body: text }),
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| LlmError::Provider {
            status,
            body: format!("unparseable response ({e}): {text}"),
        })?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or(LlmError::Provider { status, body: text })
    }
}
