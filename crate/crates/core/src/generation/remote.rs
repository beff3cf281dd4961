//! HTTP client for remote generator backends.
//!
//! Transient failures (connection errors, timeouts, 429, 5xx) retry up to
//! `max_retries` times with exponential backoff; anything else is a protocol
//! error. Exhausted retries surface as a retryable backend error carrying the
//! request id, which the engine logs as an evaluation failure.

use crate::behavior::semantic::TextEmbedder;
use crate::error::{Error, Result};
use crate::generation::protocol::{
    EmbedResponse, EmbedTextBody, FitnessBody, GenerateBody, GenerationRequest, Generated,
    RecombineRequest, TextResponse, ValueResponse,
};
use crate::generation::GeneratorBackend;
use crate::genome::VocabularyTable;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

pub const ENV_URL: &str = "QD_REMOTE_URL";
pub const ENV_TOKEN: &str = "QD_REMOTE_TOKEN";
pub const ENV_TIMEOUT_MS: &str = "QD_REMOTE_TIMEOUT_MS";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub auth_token: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    /// Forwarded opaquely in every /generate body.
    pub decode_config: serde_json::Value,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            auth_token: None,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff_base: Duration::from_millis(100),
            decode_config: serde_json::Value::Null,
        }
    }

    /// Read endpoint, token, and timeout from the environment.
    pub fn from_env() -> Result<Self> {
        let base_url = std::env::var(ENV_URL)
            .map_err(|_| Error::config(format!("{ENV_URL} is not set")))?;
        let mut cfg = RemoteConfig::new(base_url);
        if let Ok(token) = std::env::var(ENV_TOKEN) {
            cfg.auth_token = Some(token);
        }
        if let Ok(ms) = std::env::var(ENV_TIMEOUT_MS) {
            let ms: u64 = ms
                .parse()
                .map_err(|_| Error::config(format!("{ENV_TIMEOUT_MS} must be an integer")))?;
            cfg.timeout = Duration::from_millis(ms);
        }
        Ok(cfg)
    }
}

pub struct RemoteBackend {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| Error::config(format!("failed to build HTTP client: {e}")))?;
        Ok(RemoteBackend { cfg, client })
    }

    pub fn from_env() -> Result<Self> {
        Self::new(RemoteConfig::from_env()?)
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }

    /// POST with bounded retries. Returns the parsed response body.
    fn post_json<B: Serialize, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
        request_id: &str,
    ) -> Result<T> {
        let url = self.url(path);
        let mut last_error = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let backoff = self.cfg.backoff_base * 2u32.pow(attempt - 1);
                if !backoff.is_zero() {
                    std::thread::sleep(backoff);
                }
            }
            let mut request = self.client.post(&url).json(body);
            if let Some(token) = &self.cfg.auth_token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Err(e) => {
                    last_error = format!("transport error: {e}");
                }
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response.json::<T>().map_err(|e| Error::Backend {
                            request_id: Some(request_id.to_string()),
                            retryable: false,
                            message: format!("malformed response body: {e}"),
                        });
                    }
                    if status.is_server_error() || status.as_u16() == 429 {
                        last_error = format!("status {status}");
                    } else {
                        return Err(Error::Backend {
                            request_id: Some(request_id.to_string()),
                            retryable: false,
                            message: format!("protocol violation: status {status}"),
                        });
                    }
                }
            }
        }
        Err(Error::Backend {
            request_id: Some(request_id.to_string()),
            retryable: true,
            message: format!(
                "exhausted {} retries against {url}: {last_error}",
                self.cfg.max_retries
            ),
        })
    }

    /// Fetch the server's vocabulary table (`GET /vocab`).
    pub fn fetch_vocab(&self) -> Result<VocabularyTable> {
        let url = self.url("vocab");
        let mut request = self.client.get(&url);
        if let Some(token) = &self.cfg.auth_token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| Error::Backend {
            request_id: None,
            retryable: true,
            message: format!("vocab fetch failed: {e}"),
        })?;
        if !response.status().is_success() {
            return Err(Error::Backend {
                request_id: None,
                retryable: false,
                message: format!("vocab fetch returned {}", response.status()),
            });
        }
        let file: crate::genome::VocabularyFile = response.json().map_err(|e| Error::Backend {
            request_id: None,
            retryable: false,
            message: format!("malformed vocab body: {e}"),
        })?;
        if file.tokens.len() != file.n_tokens || file.embeddings.len() != file.n_tokens {
            return Err(Error::Backend {
                request_id: None,
                retryable: false,
                message: "vocab header does not match row count".into(),
            });
        }
        VocabularyTable::new(file.tokens, file.dim, file.embeddings, file.task_subset.as_deref())
    }

    pub fn embed_text(&self, text: &str, request_id: &str) -> Result<Vec<f64>> {
        let body = EmbedTextBody {
            request_id: request_id.to_string(),
            text: text.to_string(),
        };
        let response: EmbedResponse = self.post_json("embed_text", &body, request_id)?;
        response.embedding.to_values()
    }
}

impl GeneratorBackend for RemoteBackend {
    fn generate(&self, request: &GenerationRequest, _rng: &mut dyn rand::RngCore) -> Result<Generated> {
        let body = GenerateBody::from_request(request, self.cfg.decode_config.clone())?;
        let response: TextResponse = self.post_json("generate", &body, &request.request_id)?;
        Ok(Generated {
            text: response.text,
            model_id: response.model_id,
            usage: response.usage,
        })
    }

    fn recombine(&self, request: &RecombineRequest, _rng: &mut dyn rand::RngCore) -> Result<Generated> {
        let response: TextResponse = self.post_json("recombine", request, &request.request_id)?;
        Ok(Generated {
            text: response.text,
            model_id: response.model_id,
            usage: response.usage,
        })
    }

    fn evaluate_fitness(
        &self,
        text: &str,
        task: &str,
        request_id: &str,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<f64> {
        let body = FitnessBody {
            request_id: request_id.to_string(),
            text: text.to_string(),
            task: task.to_string(),
        };
        let response: ValueResponse = self.post_json("fitness", &body, request_id)?;
        if !response.value.is_finite() {
            return Err(Error::Backend {
                request_id: Some(request_id.to_string()),
                retryable: false,
                message: format!("fitness service returned non-finite value {}", response.value),
            });
        }
        Ok(response.value)
    }
}

/// `/embed_text` exposed as a semantic-pipeline embedder.
pub struct RemoteEmbedder {
    backend: Arc<RemoteBackend>,
    dim: usize,
    counter: AtomicU64,
}

impl RemoteEmbedder {
    pub fn new(backend: Arc<RemoteBackend>, dim: usize) -> Self {
        RemoteEmbedder {
            backend,
            dim,
            counter: AtomicU64::new(0),
        }
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let request_id = format!("embed-{n:06}");
        let values = self.backend.embed_text(text, &request_id)?;
        if values.len() != self.dim {
            return Err(Error::Backend {
                request_id: Some(request_id),
                retryable: false,
                message: format!("embedder returned dim {}, expected {}", values.len(), self.dim),
            });
        }
        Ok(values)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
