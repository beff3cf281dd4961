//! Semantic descriptors: a pluggable text embedder followed by a frozen
//! linear reduction to `d_s` dimensions with min-max rescaling to [0,1].
//!
//! The default embedder hashes character 3-grams into 256 buckets and
//! l2-normalizes, which keeps desk-scale runs deterministic and offline.
//! Sentence-embedding models plug in through the remote protocol behind the
//! same trait.

use crate::error::{Error, Result};
use crate::math::all_finite;
use crate::rng::fnv1a64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub trait TextEmbedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
    fn dim(&self) -> usize;
}

/// Deterministic character-n-gram hashing embedder.
///
/// Whitespace runs collapse to a single space before n-gram extraction, so
/// texts differing only in whitespace embed identically. Texts shorter than
/// `n` characters contribute the whole normalized text as one gram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashNgramEmbedder {
    pub n: usize,
    pub dim: usize,
}

impl Default for HashNgramEmbedder {
    fn default() -> Self {
        HashNgramEmbedder { n: 3, dim: 256 }
    }
}

impl HashNgramEmbedder {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::config("n-gram embedder needs n >= 1 and dim >= 1"));
        }
        Ok(HashNgramEmbedder { n, dim })
    }

    pub fn normalize_whitespace(text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut in_space = false;
        for ch in text.chars() {
            if ch.is_whitespace() {
                if !in_space && !out.is_empty() {
                    out.push(' ');
                }
                in_space = true;
            } else {
                out.push(ch);
                in_space = false;
            }
        }
        if out.ends_with(' ') {
            out.pop();
        }
        out
    }
}

impl TextEmbedder for HashNgramEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let normalized = Self::normalize_whitespace(text);
        let chars: Vec<char> = normalized.chars().collect();
        let mut counts = vec![0.0f64; self.dim];
        if chars.len() >= self.n {
            for window in chars.windows(self.n) {
                let gram: String = window.iter().collect();
                let bucket = (fnv1a64(gram.as_bytes()) % self.dim as u64) as usize;
                counts[bucket] += 1.0;
            }
        } else if !chars.is_empty() {
            let bucket = (fnv1a64(normalized.as_bytes()) % self.dim as u64) as usize;
            counts[bucket] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in &mut counts {
                *c /= norm;
            }
        }
        Ok(counts)
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Frozen linear projection with reference-corpus min-max rescaling.
///
/// Rows of `components` are orthonormal principal directions of the fitted
/// reference corpus, highest variance first, with a deterministic sign
/// convention (largest-magnitude coefficient is positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReducer {
    input_dim: usize,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    out_min: Vec<f64>,
    out_max: Vec<f64>,
}

pub fn fit_reducer(reference: &[Vec<f64>], d_s: usize, _seed: u64) -> Result<LinearReducer> {
    if d_s == 0 {
        return Err(Error::Fit("reducer needs d_s >= 1".into()));
    }
    if reference.len() < d_s + 1 {
        return Err(Error::Fit(format!(
            "reducer fit needs at least d_s+1 = {} reference vectors, got {}",
            d_s + 1,
            reference.len()
        )));
    }
    let input_dim = reference[0].len();
    if input_dim < d_s {
        return Err(Error::Fit(format!(
            "cannot reduce {input_dim} dims to {d_s}"
        )));
    }
    for (i, v) in reference.iter().enumerate() {
        if v.len() != input_dim {
            return Err(Error::Fit(format!(
                "reference vector {i} has length {}, expected {input_dim}",
                v.len()
            )));
        }
        if !all_finite(v) {
            return Err(Error::Fit(format!("reference vector {i} is not finite")));
        }
    }

    let n = reference.len() as f64;
    let mut mean = vec![0.0; input_dim];
    for v in reference {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }

    let mut centered = DMatrix::<f64>::zeros(reference.len(), input_dim);
    let mut total_variance = 0.0;
    for (r, v) in reference.iter().enumerate() {
        for (c, (x, m)) in v.iter().zip(&mean).enumerate() {
            let val = x - m;
            centered[(r, c)] = val;
            total_variance += val * val;
        }
    }
    if total_variance <= 1e-24 {
        return Err(Error::Fit(
            "degenerate reference corpus: zero variance in all directions".into(),
        ));
    }

    // Principal directions via SVD of the centered data matrix; right
    // singular vectors are the covariance eigenvectors.
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Fit("SVD failed to produce singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("finite singular values")
    });

    let mut components = Vec::with_capacity(d_s);
    for &idx in order.iter().take(d_s) {
        let mut comp: Vec<f64> = v_t.row(idx).iter().copied().collect();
        // Eigenvector sign is arbitrary; pin it so refits are identical.
        let dominant = comp
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if comp[dominant] < 0.0 {
            for c in &mut comp {
                *c = -*c;
            }
        }
        components.push(comp);
    }

    let mut out_min = vec![f64::INFINITY; d_s];
    let mut out_max = vec![f64::NEG_INFINITY; d_s];
    for v in reference {
        let raw = project_raw_with(&mean, &components, v);
        for c in 0..d_s {
            out_min[c] = out_min[c].min(raw[c]);
            out_max[c] = out_max[c].max(raw[c]);
        }
    }

    Ok(LinearReducer {
        input_dim,
        mean,
        components,
        out_min,
        out_max,
    })
}

fn project_raw_with(mean: &[f64], components: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let centered: Vec<f64> = v.iter().zip(mean).map(|(x, m)| x - m).collect();
    components
        .iter()
        .map(|comp| comp.iter().zip(&centered).map(|(c, x)| c * x).sum())
        .collect()
}

impl LinearReducer {
    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Projection before min-max rescaling.
    pub fn project_raw(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "reducer input",
                expected: self.input_dim,
                actual: v.len(),
            });
        }
        Ok(project_raw_with(&self.mean, &self.components, v))
    }

    /// Min-max rescaled projection, clamped to [0,1] per coordinate.
    /// A coordinate with zero reference spread maps to 0.5.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let raw = self.project_raw(v)?;
        Ok(raw
            .iter()
            .enumerate()
            .map(|(c, x)| {
                let spread = self.out_max[c] - self.out_min[c];
                if spread <= 0.0 {
                    0.5
                } else {
                    ((x - self.out_min[c]) / spread).clamp(0.0, 1.0)
                }
            })
            .collect())
    }

    /// Reconstruction from a raw projection: `mean + W^T y`. Used by rank
    /// oracles; exact when the corpus lies in the spanned subspace.
    pub fn reconstruct(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (comp, y) in self.components.iter().zip(raw) {
            for (o, c) in out.iter_mut().zip(comp) {
                *o += y * c;
            }
        }
        out
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }
}

/// Serializable pipeline identity: which embedder to rebuild at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    HashNgram { n: usize, dim: usize },
    /// Served by the remote backend's `/embed_text` endpoint.
    Remote { dim: usize },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::HashNgram { n: 3, dim: 256 }
    }
}

/// Embedder plus frozen reducer. Fitted once per run family; applying it to
/// the same text always yields the same vector.
#[derive(Clone)]
pub struct SemanticPipeline {
    spec: EmbedderSpec,
    embedder: Arc<dyn TextEmbedder>,
    reducer: LinearReducer,
    pub reference_corpus_id: String,
}

/// The serializable half of a pipeline (checkpoints store this and rebuild).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticPipelineState {
    pub spec: EmbedderSpec,
    pub reducer: LinearReducer,
    pub reference_corpus_id: String,
}

impl SemanticPipeline {
    pub fn new(
        spec: EmbedderSpec,
        embedder: Arc<dyn TextEmbedder>,
        reducer: LinearReducer,
        reference_corpus_id: String,
    ) -> Result<Self> {
        if embedder.dim() != reducer.input_dim() {
            return Err(Error::Dimension {
                context: "pipeline embedder vs reducer",
                expected: reducer.input_dim(),
                actual: embedder.dim(),
            });
        }
        Ok(SemanticPipeline {
            spec,
            embedder,
            reducer,
            reference_corpus_id,
        })
    }

    /// Fit from reference texts with the built-in hash-n-gram embedder.
    pub fn fit_hash_ngram(
        reference_texts: &[String],
        d_s: usize,
        seed: u64,
        corpus_id: impl Into<String>,
    ) -> Result<Self> {
        let embedder = HashNgramEmbedder::default();
        let vectors: Vec<Vec<f64>> = reference_texts
            .iter()
            .map(|t| embedder.embed(t))
            .collect::<Result<_>>()?;
        let reducer = fit_reducer(&vectors, d_s, seed)?;
        Self::new(
            EmbedderSpec::HashNgram {
                n: embedder.n,
                dim: embedder.dim,
            },
            Arc::new(embedder),
            reducer,
            corpus_id.into(),
        )
    }

    pub fn descriptor(&self, text: &str) -> Result<Vec<f64>> {
        let embedded = self.embedder.embed(text)?;
        self.reducer.apply(&embedded)
    }

    pub fn output_dim(&self) -> usize {
        self.reducer.output_dim()
    }

    pub fn reducer(&self) -> &LinearReducer {
        &self.reducer
    }

    pub fn state(&self) -> SemanticPipelineState {
        SemanticPipelineState {
            spec: self.spec.clone(),
            reducer: self.reducer.clone(),
            reference_corpus_id: self.reference_corpus_id.clone(),
        }
    }

    /// Rebuild from checkpoint state. Remote embedders need the caller to
    /// supply the live handle.
    pub fn from_state(
        state: SemanticPipelineState,
        remote_embedder: Option<Arc<dyn TextEmbedder>>,
    ) -> Result<Self> {
        let embedder: Arc<dyn TextEmbedder> = match &state.spec {
            EmbedderSpec::HashNgram { n, dim } => Arc::new(HashNgramEmbedder::new(*n, *dim)?),
            EmbedderSpec::Remote { .. } => remote_embedder.ok_or_else(|| {
                Error::config("pipeline state references a remote embedder but none was provided")
            })?,
        };
        Self::new(
            state.spec,
            embedder,
            state.reducer,
            state.reference_corpus_id,
        )
    }
}
