//! Client for OpenAI-compatible embedding endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::linalg::Matrix;
use super::{Document, TextError, VectorSet, VectorSource};
use crate::agent::backend::{agent_with_timeout, post_json, with_retry, Backoff, BackendError, API_KEY_ENV, BASE_URL_ENV};

pub const EMBEDDINGS_PATH: &str = "/embeddings";

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub batch_size: usize,
    pub timeout: Duration,
    pub backoff: Backoff,
    pub max_retries: u32,
}

impl EmbeddingClient {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> EmbeddingClient {
        EmbeddingClient {
            base_url: base_url.into(),
            api_key: api_key.into(),
            model: model.into(),
            batch_size: 64,
            timeout: Duration::from_secs(120),
            backoff: Backoff::default(),
            max_retries: 3,
        }
    }

    /// Key from the environment; base URL from the environment, else `default_base_url`.
    pub fn from_env(default_base_url: &str, model: impl Into<String>) -> Result<EmbeddingClient, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::MissingApiKey(API_KEY_ENV.into()))?;
        let base = std::env::var(BASE_URL_ENV).ok().filter(|u| !u.trim().is_empty()).unwrap_or_else(|| default_base_url.to_string());
        Ok(EmbeddingClient::new(base, key, model))
    }

    pub fn endpoint(&self) -> String {
        format!("{}{EMBEDDINGS_PATH}", self.base_url.trim_end_matches('/'))
    }

    pub fn embed(&self, texts: &[String]) -> Result<Matrix, TextError> {
        let agent = agent_with_timeout(self.timeout);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size.max(1)) {
            let body = EmbeddingRequest { model: &self.model, input: batch };
            let text = with_retry(&self.backoff, self.max_retries, || post_json(&agent, &self.endpoint(), &self.api_key, &body))?;
            let parsed: EmbeddingResponse = serde_json::from_str(&text).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
            if parsed.data.len() != batch.len() {
                return Err(BackendError::InvalidResponse(format!("{} embeddings for {} inputs", parsed.data.len(), batch.len())).into());
            }
            rows.extend(parsed.data.into_iter().map(|d| d.embedding));
        }
        let m = Matrix::from_rows(&rows)?;
        m.check_finite()?;
        Ok(m)
    }

    pub fn embed_corpus(&self, corpus: &[Document]) -> Result<VectorSet, TextError> {
        if corpus.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        let texts: Vec<String> = corpus.iter().map(|d| d.text.clone()).collect();
        VectorSet::new(self.embed(&texts)?, None, VectorSource::ExternalEmbedding { model: self.model.clone() })
    }
}
