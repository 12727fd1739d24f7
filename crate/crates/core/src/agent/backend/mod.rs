//! Pluggable chat-completion backends.

mod http;
mod mock;

pub(crate) use http::{agent_with_timeout, post_json, with_retry};
pub use http::{Backoff, HttpBackend, HttpBackendConfig, API_KEY_ENV, BASE_URL_ENV};
pub use mock::{MockBackend, MockScript, PhraseBank};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::DailyPrompt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatBackendParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_retries: u32,
}

impl Default for ChatBackendParams {
    fn default() -> Self {
        ChatBackendParams {
            temperature: 0.0,
            max_tokens: 1024,
            model_name: "mock".into(),
            timeout: Duration::from_secs(120),
            max_retries: 3,
        }
    }
}

impl ChatBackendParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidParams(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited by the backend")]
    RateLimited,
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("missing {0}")]
    MissingApiKey(String),
    #[error("invalid backend parameters: {0}")]
    InvalidParams(String),
}

impl BackendError {
    pub fn category(&self) -> &'static str {
        match self {
            BackendError::Transport(_) => "transport",
            BackendError::Timeout => "timeout",
            BackendError::RateLimited => "rate_limited",
            BackendError::Status { .. } => "status",
            BackendError::InvalidResponse(_) => "invalid_response",
            BackendError::MissingApiKey(_) => "missing_api_key",
            BackendError::InvalidParams(_) => "invalid_params",
        }
    }

    /// Whether a retry after backoff may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Timeout | BackendError::RateLimited => true,
            BackendError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &DailyPrompt, params: &ChatBackendParams) -> Result<String, BackendError>;

    /// Model identifier written to trace records.
    fn model_name(&self, params: &ChatBackendParams) -> String;
}
