//! Prompt-embedding genomes, vocabulary tables, and vocabulary projection.
//!
//! A genome is an `n × d` real matrix of virtual-token embeddings. It is
//! initialized around the mean embedding of a task-relevant vocabulary and can
//! be projected back onto discrete vocabulary tokens for backends that only
//! accept token input.

use crate::error::{Error, Result};
use crate::math::{all_finite, l2_distance, l2_distance_sq};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// An `n × d` matrix of virtual-token embeddings, stored row-major.
/// Entries are finite at all times; constructors and mutators enforce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEmbedding {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl PromptEmbedding {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::config(format!(
                "prompt embedding needs n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        if values.len() != n * d {
            return Err(Error::Dimension {
                context: "prompt embedding values",
                expected: n * d,
                actual: values.len(),
            });
        }
        if !all_finite(&values) {
            return Err(Error::config("prompt embedding contains non-finite entries"));
        }
        Ok(PromptEmbedding { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::config("prompt embedding rows have unequal lengths"));
        }
        Self::new(n, d, rows.concat())
    }

    pub fn n_tokens(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// The flattened `vec(p)` view, length `n * d`.
    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    /// `p + scale * delta`, where `delta` runs over the flattened matrix.
    pub fn add_flat(&self, delta: &[f64], scale: f64) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(Error::Dimension {
                context: "embedding update",
                expected: self.values.len(),
                actual: delta.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(delta)
            .map(|(v, d)| v + scale * d)
            .collect();
        Self::new(self.n, self.d, values)
    }

    /// `beta * self + (1 - beta) * other`.
    pub fn lerp(&self, other: &Self, beta: f64) -> Result<Self> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::Dimension {
                context: "crossover parents",
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| beta * a + (1.0 - beta) * b)
            .collect();
        Self::new(self.n, self.d, values)
    }
}

/// Token-to-embedding table used for genome initialization and projection.
///
/// `task_subset`, when present, names the task-relevant tokens whose rows
/// define the initialization mean; projection always uses the full table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyTable {
    tokens: Vec<String>,
    dim: usize,
    embeddings: Vec<f64>,
    task_subset: Option<Vec<usize>>,
}

/// On-disk vocabulary layout: a single JSON document with the header fields
/// alongside the matrix. `n_tokens` is validated against both lists.
#[derive(Debug, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub n_tokens: usize,
    pub dim: usize,
    pub tokens: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_subset: Option<Vec<String>>,
}

impl VocabularyTable {
    pub fn new(
        tokens: Vec<String>,
        dim: usize,
        rows: Vec<Vec<f64>>,
        task_subset: Option<&[String]>,
    ) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(Error::config("vocabulary needs at least 2 tokens"));
        }
        if rows.len() != tokens.len() {
            return Err(Error::Dimension {
                context: "vocabulary rows",
                expected: tokens.len(),
                actual: rows.len(),
            });
        }
        let mut embeddings = Vec::with_capacity(tokens.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    context: "vocabulary embedding row",
                    expected: dim,
                    actual: row.len(),
                });
            }
            if !all_finite(row) {
                return Err(Error::config("vocabulary embedding has non-finite entries"));
            }
            embeddings.extend_from_slice(row);
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if !seen.insert(t.as_str()) {
                return Err(Error::config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let task_subset = match task_subset {
            None => None,
            Some(names) => {
                if names.is_empty() {
                    return Err(Error::config("task subset present but empty"));
                }
                let mut idx = Vec::with_capacity(names.len());
                for name in names {
                    let i = tokens
                        .iter()
                        .position(|t| t == name)
                        .ok_or_else(|| Error::config(format!("subset token {name:?} not in vocabulary")))?;
                    idx.push(i);
                }
                Some(idx)
            }
        };
        Ok(VocabularyTable {
            tokens,
            dim,
            embeddings,
            task_subset,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let file: VocabularyFile = serde_json::from_str(&raw)?;
        if file.tokens.len() != file.n_tokens {
            return Err(Error::Dimension {
                context: "vocabulary header n_tokens",
                expected: file.n_tokens,
                actual: file.tokens.len(),
            });
        }
        if file.embeddings.len() != file.n_tokens {
            return Err(Error::Dimension {
                context: "vocabulary header row count",
                expected: file.n_tokens,
                actual: file.embeddings.len(),
            });
        }
        Self::new(
            file.tokens,
            file.dim,
            file.embeddings,
            file.task_subset.as_deref(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = VocabularyFile {
            n_tokens: self.tokens.len(),
            dim: self.dim,
            tokens: self.tokens.clone(),
            embeddings: (0..self.tokens.len())
                .map(|i| self.embedding(i).to_vec())
                .collect(),
            task_subset: self
                .task_subset
                .as_ref()
                .map(|idx| idx.iter().map(|&i| self.tokens[i].clone()).collect()),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Deterministic table for desk-scale runs: token `t000`, `t001`, ... with
    /// Gaussian embeddings of the given scale.
    pub fn generated(size: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        if size < 2 {
            return Err(Error::config("generated vocabulary needs size >= 2"));
        }
        let tokens = (0..size).map(|i| format!("t{i:03}")).collect();
        let rows = (0..size)
            .map(|_| {
                (0..dim)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Self::new(tokens, dim, rows, None)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn embedding(&self, i: usize) -> &[f64] {
        &self.embeddings[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean embedding over the task subset (full table when no subset is
    /// configured). Recomputed on every call so it can never go stale.
    pub fn mean_embedding(&self) -> Vec<f64> {
        let indices: Vec<usize> = match &self.task_subset {
            Some(idx) => idx.clone(),
            None => (0..self.tokens.len()).collect(),
        };
        let mut mean = vec![0.0; self.dim];
        for &i in &indices {
            for (m, v) in mean.iter_mut().zip(self.embedding(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= indices.len() as f64;
        }
        mean
    }
}

/// Draw each genome row as `mu_vocab + sigma_init * z`, `z` standard normal.
pub fn init_embedding(
    vocab: &VocabularyTable,
    n_tokens: usize,
    sigma_init: f64,
    rng: &mut impl Rng,
) -> Result<PromptEmbedding> {
    if vocab.is_empty() {
        return Err(Error::config("cannot initialize embedding from empty vocabulary"));
    }
    if sigma_init < 0.0 || !sigma_init.is_finite() {
        return Err(Error::config(format!(
            "sigma_init must be finite and >= 0, got {sigma_init}"
        )));
    }
    let mean = vocab.mean_embedding();
    let d = vocab.dim();
    let mut values = Vec::with_capacity(n_tokens * d);
    for _ in 0..n_tokens {
        for mu in &mean {
            let z: f64 = rng.sample(StandardNormal);
            values.push(mu + sigma_init * z);
        }
    }
    PromptEmbedding::new(n_tokens, d, values)
}

/// Result of projecting a genome onto discrete vocabulary tokens.
///
/// Token selection happens in raw embedding space (nearest Euclidean row,
/// ties to the lowest token index). The headline `error_normalized` is the
/// mean per-row distance after unit-normalizing both sides; `error_raw` is
/// the same mean in raw space, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub tokens: Vec<String>,
    pub token_indices: Vec<usize>,
    pub error_normalized: f64,
    pub error_raw: f64,
    /// Genome rows with zero norm, which were compared unnormalized.
    pub zero_norm_rows: Vec<usize>,
}

pub fn project_to_vocab(p: &PromptEmbedding, vocab: &VocabularyTable) -> Result<Projection> {
    if p.dim() != vocab.dim() {
        return Err(Error::Dimension {
            context: "projection embedding dim",
            expected: vocab.dim(),
            actual: p.dim(),
        });
    }
    let mut token_indices = Vec::with_capacity(p.n_tokens());
    let mut raw_sum = 0.0;
    let mut norm_sum = 0.0;
    let mut zero_norm_rows = Vec::new();

    for i in 0..p.n_tokens() {
        let row = p.row(i);
        let mut best = 0usize;
        let mut best_d = l2_distance_sq(row, vocab.embedding(0));
        for j in 1..vocab.len() {
            let d = l2_distance_sq(row, vocab.embedding(j));
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        token_indices.push(best);
        raw_sum += best_d.sqrt();

        let row_unit = unit_or_flag(row, i, &mut zero_norm_rows);
        let emb = vocab.embedding(best);
        let emb_unit = unit_or_same(emb);
        norm_sum += l2_distance(&row_unit, &emb_unit);
    }

    let n = p.n_tokens() as f64;
    Ok(Projection {
        tokens: token_indices.iter().map(|&j| vocab.token(j).to_string()).collect(),
        token_indices,
        error_normalized: norm_sum / n,
        error_raw: raw_sum / n,
        zero_norm_rows,
    })
}

fn unit_or_flag(row: &[f64], idx: usize, flagged: &mut Vec<usize>) -> Vec<f64> {
    let n = crate::math::norm(row);
    if n > 0.0 {
        row.iter().map(|v| v / n).collect()
    } else {
        flagged.push(idx);
        row.to_vec()
    }
}

fn unit_or_same(v: &[f64]) -> Vec<f64> {
    let n = crate::math::norm(v);
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}
