//! Wire protocol for remote generator backends.
//!
//! HTTP endpoints: `POST /generate`, `POST /recombine`, `POST /fitness`,
//! `POST /embed_text`, `GET /vocab`. Bodies are JSON; embedding matrices
//! travel as base64-encoded little-endian f32, row-major. Responses carry
//! `{text | value, model_id, usage}`.

use crate::error::{Error, Result};
use crate::genome::PromptEmbedding;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// The backend receives the raw embedding matrix and injects it before
    /// the task tokens. Requires server cooperation.
    SoftPrompt,
    /// The backend receives nearest-vocabulary tokens only; works against
    /// completion-style APIs.
    Projected,
}

/// One generation call. Exactly one of `embedding`/`tokens` is populated,
/// matching the mode.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub mode: GenerationMode,
    pub embedding: Option<PromptEmbedding>,
    pub tokens: Option<Vec<String>>,
    pub task: String,
    pub request_id: String,
    pub decode_seed: u64,
}

impl GenerationRequest {
    pub fn soft_prompt(
        embedding: PromptEmbedding,
        task: impl Into<String>,
        request_id: impl Into<String>,
        decode_seed: u64,
    ) -> Self {
        GenerationRequest {
            mode: GenerationMode::SoftPrompt,
            embedding: Some(embedding),
            tokens: None,
            task: task.into(),
            request_id: request_id.into(),
            decode_seed,
        }
    }

    pub fn projected(
        tokens: Vec<String>,
        task: impl Into<String>,
        request_id: impl Into<String>,
        decode_seed: u64,
    ) -> Self {
        GenerationRequest {
            mode: GenerationMode::Projected,
            embedding: None,
            tokens: Some(tokens),
            task: task.into(),
            request_id: request_id.into(),
            decode_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            GenerationMode::SoftPrompt => {
                if self.embedding.is_none() || self.tokens.is_some() {
                    return Err(Error::config(
                        "soft-prompt request must carry an embedding and no tokens",
                    ));
                }
            }
            GenerationMode::Projected => {
                if self.tokens.is_none() || self.embedding.is_some() {
                    return Err(Error::config(
                        "projected request must carry tokens and no embedding",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Structured recombination request: both parent texts travel verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecombineRequest {
    pub request_id: String,
    pub parent_a: String,
    pub parent_b: String,
    pub task: String,
}

/// Backend output plus whatever metadata the backend reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

/// Base64 little-endian f32 matrix payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingPayload {
    pub n: usize,
    pub d: usize,
    pub data_b64: String,
}

impl EmbeddingPayload {
    pub fn from_embedding(p: &PromptEmbedding) -> Self {
        let mut bytes = Vec::with_capacity(p.flat().len() * 4);
        for &v in p.flat() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        EmbeddingPayload {
            n: p.n_tokens(),
            d: p.dim(),
            data_b64: BASE64.encode(bytes),
        }
    }

    pub fn to_embedding(&self) -> Result<PromptEmbedding> {
        let values = decode_f32_values(&self.data_b64, self.n * self.d)?;
        PromptEmbedding::new(self.n, self.d, values)
    }
}

/// Base64 little-endian f32 vector payload (`/embed_text` responses).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorPayload {
    pub dim: usize,
    pub data_b64: String,
}

impl VectorPayload {
    pub fn from_values(values: &[f64]) -> Self {
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for &v in values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        VectorPayload {
            dim: values.len(),
            data_b64: BASE64.encode(bytes),
        }
    }

    pub fn to_values(&self) -> Result<Vec<f64>> {
        decode_f32_values(&self.data_b64, self.dim)
    }
}

fn decode_f32_values(data_b64: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = BASE64
        .decode(data_b64)
        .map_err(|e| Error::Backend {
            request_id: None,
            retryable: false,
            message: format!("invalid base64 payload: {e}"),
        })?;
    if bytes.len() != expected * 4 {
        return Err(Error::Backend {
            request_id: None,
            retryable: false,
            message: format!(
                "payload holds {} bytes, expected {} (= {expected} f32 values)",
                bytes.len(),
                expected * 4
            ),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// `POST /generate` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateBody {
    pub request_id: String,
    pub mode: GenerationMode,
    pub task: String,
    pub decode_seed: u64,
    /// Forwarded opaquely; decoding parameters are a backend concern.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub decode_config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl GenerateBody {
    pub fn from_request(request: &GenerationRequest, decode_config: serde_json::Value) -> Result<Self> {
        request.validate()?;
        Ok(GenerateBody {
            request_id: request.request_id.clone(),
            mode: request.mode,
            task: request.task.clone(),
            decode_seed: request.decode_seed,
            decode_config,
            embedding: request.embedding.as_ref().map(EmbeddingPayload::from_embedding),
            tokens: request.tokens.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessBody {
    pub request_id: String,
    pub text: String,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextBody {
    pub request_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueResponse {
    pub value: f64,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: VectorPayload,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub usage: Option<Usage>,
}
