//! Deterministic synthetic landscape for desk-scale verification.
//!
//! Behavior is a seeded linear map of the flattened genome (optionally
//! sinusoidally warped), text is an invertible codec over quantized behavior,
//! and fitness is a mixture of radial-basis bumps over behavior space. With
//! `noise_sigma = 0` an entire engine run is a deterministic function of
//! (config, seed).

use crate::error::{Error, Result};
use crate::generation::protocol::{GenerationMode, GenerationRequest, Generated, RecombineRequest};
use crate::generation::GeneratorBackend;
use crate::genome::{PromptEmbedding, VocabularyTable};
use crate::math::{dot, l2_distance_sq};
use crate::rng::named_stream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const MODEL_ID: &str = "synthetic-landscape-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Virtual tokens the landscape expects.
    pub n_tokens: usize,
    /// Embedding dimension the landscape expects.
    pub dim: usize,
    pub behavior_dim: usize,
    /// Scale of the behavior response to embedding movement.
    pub gain: f64,
    /// Ratio of the last behavior row's gain to the first's; rows in between
    /// interpolate geometrically. 1.0 keeps the map isotropic; small values
    /// make some behavior directions hard to reach by undirected mutation.
    pub anisotropy: f64,
    /// Sinusoidal warp amplitude; 0 keeps the map linear.
    pub warp_amplitude: f64,
    pub warp_frequency: f64,
    pub bumps: usize,
    /// Fitness added uniformly inside the valid behavior box, under the
    /// bump mixture. Zero keeps fitness purely bump-driven.
    pub base_fitness: f64,
    /// Per-coordinate range bump centers are drawn from.
    pub bump_min: f64,
    pub bump_max: f64,
    /// Behavior-space point the zero-information genome maps to.
    pub center: f64,
    pub noise_sigma: f64,
    /// Codec rounding step; 0 encodes behavior losslessly.
    pub quantization: f64,
    /// Seeds the map and the fitness bumps; independent of the run seed so
    /// paired runs share one landscape.
    pub landscape_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tokens: 4,
            dim: 16,
            behavior_dim: 4,
            gain: 1.0,
            anisotropy: 1.0,
            warp_amplitude: 0.0,
            warp_frequency: 6.0,
            bumps: 12,
            base_fitness: 0.0,
            bump_min: 0.1,
            bump_max: 0.9,
            center: 0.5,
            noise_sigma: 0.05,
            quantization: 1e-3,
            landscape_seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tokens == 0 || self.dim == 0 || self.behavior_dim == 0 {
            return Err(Error::config("synthetic landscape dimensions must be >= 1"));
        }
        if self.bumps == 0 {
            return Err(Error::config("synthetic landscape needs at least one fitness bump"));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::config(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.quantization < 0.0 || !self.quantization.is_finite() {
            return Err(Error::config(format!(
                "quantization must be finite and >= 0, got {}",
                self.quantization
            )));
        }
        if self.gain <= 0.0 || !self.gain.is_finite() {
            return Err(Error::config(format!("gain must be positive, got {}", self.gain)));
        }
        if !self.center.is_finite() {
            return Err(Error::config("center must be finite"));
        }
        if self.anisotropy <= 0.0 || !self.anisotropy.is_finite() {
            return Err(Error::config(format!(
                "anisotropy must be positive, got {}",
                self.anisotropy
            )));
        }
        if !(0.0..=1.0).contains(&self.base_fitness) {
            return Err(Error::config(format!(
                "base_fitness must be in [0,1], got {}",
                self.base_fitness
            )));
        }
        if !(self.bump_min < self.bump_max) || !self.bump_min.is_finite() || !self.bump_max.is_finite() {
            return Err(Error::config("bump range must satisfy bump_min < bump_max"));
        }
        if self.warp_amplitude < 0.0 || self.warp_frequency <= 0.0 {
            return Err(Error::config("warp parameters must be non-negative / positive"));
        }
        Ok(())
    }
}

/// Invertible encoding of quantized behavior vectors into token strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCodec {
    pub behavior_dim: usize,
    pub quantization: f64,
}

impl TextCodec {
    pub fn encode(&self, behavior: &[f64]) -> String {
        debug_assert_eq!(behavior.len(), self.behavior_dim);
        let mut text = String::from("bhv");
        for &v in behavior {
            let q = if self.quantization > 0.0 {
                (v / self.quantization).round() * self.quantization
            } else {
                v
            };
            text.push(' ');
            text.push_str(&format!("{q:?}"));
        }
        text
    }

    pub fn decode(&self, text: &str) -> Result<Vec<f64>> {
        let mut parts = text.split_whitespace();
        if parts.next() != Some("bhv") {
            return Err(Error::evaluation(format!(
                "text is not in codec form (missing prefix): {text:?}"
            )));
        }
        let values: Vec<f64> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::evaluation(format!("codec token {t:?} is not a number")))
            })
            .collect::<Result<_>>()?;
        if values.len() != self.behavior_dim {
            return Err(Error::Dimension {
                context: "codec behavior",
                expected: self.behavior_dim,
                actual: values.len(),
            });
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticLandscape {
    cfg: SyntheticConfig,
    /// behavior_dim rows of length n_tokens * dim.
    map: Vec<Vec<f64>>,
    offset: Vec<f64>,
    bump_centers: Vec<Vec<f64>>,
    bump_amplitudes: Vec<f64>,
    bump_widths: Vec<f64>,
    codec: TextCodec,
    /// Needed only for projected-mode requests.
    vocab: Option<VocabularyTable>,
}

impl SyntheticLandscape {
    pub fn new(cfg: SyntheticConfig) -> Result<Self> {
        cfg.validate()?;
        let genome_len = cfg.n_tokens * cfg.dim;
        let mut rng = named_stream(cfg.landscape_seed, "landscape");
        let base_scale = cfg.gain / (genome_len as f64).sqrt();
        let map: Vec<Vec<f64>> = (0..cfg.behavior_dim)
            .map(|row| {
                let exponent = if cfg.behavior_dim > 1 {
                    row as f64 / (cfg.behavior_dim - 1) as f64
                } else {
                    0.0
                };
                let scale = base_scale * cfg.anisotropy.powf(exponent);
                (0..genome_len)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let offset = vec![cfg.center; cfg.behavior_dim];
        let bump_centers: Vec<Vec<f64>> = (0..cfg.bumps)
            .map(|_| (0..cfg.behavior_dim).map(|_| rng.random_range(cfg.bump_min..cfg.bump_max)).collect())
            .collect();
        let bump_amplitudes: Vec<f64> = (0..cfg.bumps).map(|_| rng.random_range(0.4..1.0)).collect();
        let bump_widths: Vec<f64> = (0..cfg.bumps).map(|_| rng.random_range(0.08..0.2)).collect();
        let codec = TextCodec {
            behavior_dim: cfg.behavior_dim,
            quantization: cfg.quantization,
        };
        Ok(SyntheticLandscape {
            cfg,
            map,
            offset,
            bump_centers,
            bump_amplitudes,
            bump_widths,
            codec,
            vocab: None,
        })
    }

    /// Attach a vocabulary so projected-mode requests can be re-embedded.
    pub fn with_vocab(mut self, vocab: VocabularyTable) -> Self {
        self.vocab = Some(vocab);
        self
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    pub fn codec(&self) -> &TextCodec {
        &self.codec
    }

    /// The linear behavior map rows (each of length n_tokens * dim).
    pub fn behavior_matrix(&self) -> &[Vec<f64>] {
        &self.map
    }

    /// Noise-free behavior of an embedding.
    pub fn behavior_exact(&self, p: &PromptEmbedding) -> Result<Vec<f64>> {
        let genome_len = self.cfg.n_tokens * self.cfg.dim;
        if p.flat().len() != genome_len {
            return Err(Error::Dimension {
                context: "synthetic genome",
                expected: genome_len,
                actual: p.flat().len(),
            });
        }
        Ok(self
            .map
            .iter()
            .zip(&self.offset)
            .map(|(row, off)| {
                let raw = dot(row, p.flat());
                let warped = if self.cfg.warp_amplitude > 0.0 {
                    raw + self.cfg.warp_amplitude * (self.cfg.warp_frequency * raw).sin()
                } else {
                    raw
                };
                off + warped
            })
            .collect())
    }

    /// Noise-free fitness of a behavior point: the bump mixture inside the
    /// unit box, zero outside (the documented floor).
    pub fn fitness_of_behavior(&self, behavior: &[f64]) -> f64 {
        if behavior.len() != self.cfg.behavior_dim {
            return 0.0;
        }
        if behavior.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return 0.0;
        }
        let mixture: f64 = self
            .bump_centers
            .iter()
            .zip(self.bump_amplitudes.iter().zip(&self.bump_widths))
            .map(|(center, (amp, width))| {
                amp * (-l2_distance_sq(center, behavior) / (2.0 * width * width)).exp()
            })
            .sum();
        (self.cfg.base_fitness + mixture).clamp(0.0, 1.0)
    }

    pub fn bump_centers(&self) -> &[Vec<f64>] {
        &self.bump_centers
    }

    pub fn bump_amplitudes(&self) -> &[f64] {
        &self.bump_amplitudes
    }

    fn embedding_for(&self, request: &GenerationRequest) -> Result<PromptEmbedding> {
        request.validate()?;
        match request.mode {
            GenerationMode::SoftPrompt => Ok(request.embedding.clone().expect("validated")),
            GenerationMode::Projected => {
                let vocab = self.vocab.as_ref().ok_or_else(|| {
                    Error::config("synthetic backend has no vocabulary for projected mode")
                })?;
                let tokens = request.tokens.as_ref().expect("validated");
                let rows: Vec<Vec<f64>> = tokens
                    .iter()
                    .map(|t| {
                        vocab
                            .token_index(t)
                            .map(|i| vocab.embedding(i).to_vec())
                            .ok_or_else(|| Error::config(format!("unknown token {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                PromptEmbedding::from_rows(&rows)
            }
        }
    }
}

impl GeneratorBackend for SyntheticLandscape {
    fn generate(&self, request: &GenerationRequest, rng: &mut dyn rand::RngCore) -> Result<Generated> {
        let p = self.embedding_for(request)?;
        let mut behavior = self.behavior_exact(&p)?;
        if self.cfg.noise_sigma > 0.0 {
            for b in &mut behavior {
                let z: f64 = StandardNormal.sample(rng);
                *b += self.cfg.noise_sigma * z;
            }
        }
        Ok(Generated {
            text: self.codec.encode(&behavior),
            model_id: Some(MODEL_ID.into()),
            usage: None,
        })
    }

    fn recombine(&self, request: &RecombineRequest, _rng: &mut dyn rand::RngCore) -> Result<Generated> {
        let a = self.codec.decode(&request.parent_a)?;
        let b = self.codec.decode(&request.parent_b)?;
        let midpoint: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        Ok(Generated {
            text: self.codec.encode(&midpoint),
            model_id: Some(MODEL_ID.into()),
            usage: None,
        })
    }

    fn evaluate_fitness(
        &self,
        text: &str,
        _task: &str,
        _request_id: &str,
        rng: &mut dyn rand::RngCore,
    ) -> Result<f64> {
        let behavior = self.codec.decode(text)?;
        if behavior.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Ok(0.0);
        }
        let mut fitness = self.fitness_of_behavior(&behavior);
        if self.cfg.noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            fitness = (fitness + self.cfg.noise_sigma * z).clamp(0.0, 1.0);
        }
        Ok(fitness)
    }
}
