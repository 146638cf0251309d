//! Chat-completion client: model registry, providers (HTTP and a
//! deterministic mock), response cache, retries and bounded concurrency.

mod client;
mod extract;
mod mock;
mod provider;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Setup;

pub use client::{Client, Completion, GenParams, Limiter, ResponseCache, RetryPolicy};
pub use extract::{extract_comment, Extracted};
pub use mock::{MockProvider, JUDGE_MARKER};
pub use provider::{provider_for, ChatRequest, HttpProvider, Provider, RequestMeta};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("provider returned {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("prompt needs {needed} tokens but {model} accepts {window}")]
    ContextOverflow { model: String, needed: usize, window: usize },
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("could not find a comment or code in the model output")]
    Extraction { raw: String },
    #[error("cache error on {0}: {1}")]
    Cache(PathBuf, std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RequestShape {
    #[default]
    ChatCompletionsV1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub context_window: usize,
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub request_shape: RequestShape,
    #[serde(default)]
    pub kind: ProviderKind,
    /// Model identifier sent on the wire; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
    /// Reasoning models reject an explicit temperature.
    #[serde(default = "yes")]
    pub send_temperature: bool,
}

fn yes() -> bool {
    true
}

static ENV_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z_][A-Z0-9_]*$").unwrap());

impl ModelSpec {
    pub fn wire_model(&self) -> &str {
        self.api_model.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.context_window == 0 {
            return Err(LlmError::Config(format!("{}: context_window must be positive", self.name)));
        }
        if let Some(env) = &self.auth_env {
            if !ENV_NAME.is_match(env) {
                return Err(LlmError::Config(format!(
                    "{}: auth_env must name an environment variable, not hold a key",
                    self.name
                )));
            }
        }
        if self.kind == ProviderKind::Http && self.endpoint.is_empty() {
            return Err(LlmError::Config(format!("{}: missing endpoint", self.name)));
        }
        Ok(())
    }
}

fn http(name: &str, window: usize, endpoint: &str, env: &str, api_model: &str, temp: bool) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        context_window: window,
        endpoint: endpoint.into(),
        auth_env: Some(env.into()),
        request_shape: RequestShape::ChatCompletionsV1,
        kind: ProviderKind::Http,
        api_model: Some(api_model.into()),
        send_temperature: temp,
    }
}

const OPENAI: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub models: Vec<ModelSpec>,
}

impl Registry {
    pub fn builtin() -> Registry {
        Registry {
            models: vec![
                http("o3", 200_000, OPENAI, "OPENAI_API_KEY", "o3", false),
                http("o4-mini", 200_000, OPENAI, "OPENAI_API_KEY", "o4-mini", false),
                http(
                    "codestral-25.01",
                    256_000,
                    "https://codestral.mistral.ai/v1/chat/completions",
                    "CODESTRAL_API_KEY",
                    "codestral-2501",
                    true,
                ),
                http(
                    "deepseek-r1",
                    64_000,
                    "https://api.deepseek.com/chat/completions",
                    "DEEPSEEK_API_KEY",
                    "deepseek-reasoner",
                    false,
                ),
                http("gpt-4o", 128_000, OPENAI, "OPENAI_API_KEY", "gpt-4o", true),
                ModelSpec {
                    name: "mock".into(),
                    context_window: 32_000,
                    endpoint: String::new(),
                    auth_env: None,
                    request_shape: RequestShape::ChatCompletionsV1,
                    kind: ProviderKind::Mock,
                    api_model: None,
                    send_temperature: true,
                },
            ],
        }
    }

    /// Built-in models overridden or extended by a `models.json` file, which
    /// holds either a list of specs or `{"models": [...]}`.
    pub fn load(path: &Path) -> Result<Registry, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("cannot read {}: {e}", path.display())))?;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum File {
            List(Vec<ModelSpec>),
            Wrapped { models: Vec<ModelSpec> },
        }
        let extra = match serde_json::from_str::<File>(&text)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?
        {
            File::List(m) | File::Wrapped { models: m } => m,
        };
        let mut reg = Registry::builtin();
        for m in extra {
            m.validate()?;
            match reg.models.iter_mut().find(|x| x.name.eq_ignore_ascii_case(&m.name)) {
                Some(slot) => *slot = m,
                None => reg.models.push(m),
            }
        }
        Ok(reg)
    }

    pub fn get(&self, name: &str) -> Result<&ModelSpec, LlmError> {
        self.models
            .iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| LlmError::Config(format!("unknown model `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedComment {
    pub unit_id: String,
    pub model: String,
    pub setup: Setup,
    pub pass_index: usize,
    /// Comment text without delimiters; empty when `empty` is set.
    pub text: String,
    /// The model produced no comment for this unit (or dropped the unit).
    pub empty: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_comment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotated_file: Option<String>,
    pub latency_ms: u64,
    pub cached: bool,
}
