//! Engine configuration: the JSON config file mirrors this struct
//! field-for-field.

use crate::behavior::semantic::EmbedderSpec;
use crate::error::{Error, Result};
use crate::generation::synthetic::SyntheticConfig;
use crate::generation::GenerationMode;
use crate::variation::TargetedMutationConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Master seed; all substreams derive from it.
    pub seed: u64,
    /// Loop iterations. Zero runs initialization only.
    pub budget: u64,
    pub task: String,
    pub n_tokens: usize,
    pub dim: usize,
    #[serde(default = "default_mode")]
    pub mode: GenerationMode,
    pub cells: usize,
    pub max_cells: usize,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity: usize,
    /// Defaults to max(1, cells / 16).
    #[serde(default)]
    pub initial_population: Option<usize>,
    #[serde(default = "default_init_sigma")]
    pub init_sigma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_p_cross")]
    pub p_cross: f64,
    #[serde(default = "default_p_targeted")]
    pub p_targeted: f64,
    /// Draw operators independently (crossover may stack with a mutation)
    /// instead of the default mutually-exclusive draw.
    #[serde(default)]
    pub operator_stacking: bool,
    /// Ablation switch: embeddings never change; offspring only regenerate
    /// text. Requires p_targeted = 0.
    #[serde(default)]
    pub freeze_embeddings: bool,
    #[serde(default = "default_reeval_fraction")]
    pub reeval_fraction: f64,
    /// Re-evaluate every this many iterations (steady-state stand-in for
    /// "per generation").
    #[serde(default = "default_reeval_period")]
    pub reeval_period: u64,
    #[serde(default)]
    pub mutation: MutationParams,
    #[serde(default)]
    pub targeted: TargetedMutationConfig,
    pub vocab: VocabSource,
    pub reference: ReferenceSource,
    pub behavior: BehaviorSpec,
    pub backend: BackendSpec,
}

fn default_mode() -> GenerationMode {
    GenerationMode::SoftPrompt
}
fn default_buffer_capacity() -> usize {
    3
}
fn default_init_sigma() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    0.6
}
fn default_p_cross() -> f64 {
    0.3
}
fn default_p_targeted() -> f64 {
    0.35
}
fn default_reeval_fraction() -> f64 {
    0.1
}
fn default_reeval_period() -> u64 {
    10
}

/// Mutation-strength adaptation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationParams {
    pub sigma0: f64,
    pub c_sigma: f64,
    pub p_target_success: f64,
    pub window: usize,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams {
            sigma0: 0.1,
            c_sigma: 0.1,
            p_target_success: 0.2,
            window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum VocabSource {
    /// Deterministic Gaussian table derived from the init stream.
    Generated { size: usize, scale: f64 },
    /// JSON vocabulary file (see the repository docs for the layout).
    File { path: String },
    /// `GET /vocab` from the remote backend.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSource {
    /// Sample this many genomes from the init distribution, generate, and
    /// describe them.
    Sampled { size: usize },
    /// JSON file: an array of descriptor vectors (already fused).
    File { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplicitKind {
    Code,
    Writing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorSpec {
    /// Synthetic runs: decode behavior from codec text and split it into
    /// semantic (first d_s dims) and explicit parts.
    Codec { d_s: usize },
    /// Text runs: semantic pipeline plus explicit feature extraction.
    /// `reference_texts` is a path to one reference text per line.
    Hybrid {
        d_s: usize,
        #[serde(default)]
        embedder: EmbedderSpec,
        explicit: ExplicitKind,
        reference_texts: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Synthetic {
        #[serde(default)]
        config: SyntheticConfig,
    },
    /// Endpoint, token, and timeout come from QD_REMOTE_* environment
    /// variables.
    Remote,
    Fixture { path: String },
}

impl EngineConfig {
    /// Desk-scale synthetic default matching the landscape defaults.
    pub fn synthetic_default(seed: u64, budget: u64) -> Self {
        let synthetic = SyntheticConfig::default();
        EngineConfig {
            seed,
            budget,
            task: "synthetic".into(),
            n_tokens: synthetic.n_tokens,
            dim: synthetic.dim,
            mode: GenerationMode::SoftPrompt,
            cells: 64,
            max_cells: 96,
            buffer_capacity: 3,
            initial_population: None,
            init_sigma: 0.1,
            alpha: 0.6,
            p_cross: 0.3,
            p_targeted: 0.35,
            operator_stacking: false,
            freeze_embeddings: false,
            reeval_fraction: 0.1,
            reeval_period: 10,
            mutation: MutationParams::default(),
            targeted: TargetedMutationConfig::default(),
            vocab: VocabSource::Generated { size: 64, scale: 0.5 },
            reference: ReferenceSource::Sampled { size: 640 },
            behavior: BehaviorSpec::Codec { d_s: 2 },
            backend: BackendSpec::Synthetic { config: synthetic },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let cfg: EngineConfig = serde_json::from_str(&raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn initial_population_size(&self) -> usize {
        self.initial_population.unwrap_or((self.cells / 16).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.task.is_empty() {
            return Err(Error::config("task must not be empty"));
        }
        if self.n_tokens == 0 || self.dim == 0 {
            return Err(Error::config("n_tokens and dim must be >= 1"));
        }
        if self.cells == 0 {
            return Err(Error::config("cells must be >= 1"));
        }
        if self.max_cells < self.cells {
            return Err(Error::config(format!(
                "max_cells ({}) must be >= cells ({})",
                self.max_cells, self.cells
            )));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("buffer_capacity must be >= 1"));
        }
        if let Some(pop) = self.initial_population {
            if pop == 0 {
                return Err(Error::config("initial_population must be >= 1 when set"));
            }
        }
        if self.init_sigma < 0.0 || !self.init_sigma.is_finite() {
            return Err(Error::config(format!(
                "init_sigma must be finite and >= 0, got {}",
                self.init_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.p_cross) || !(0.0..=1.0).contains(&self.p_targeted) {
            return Err(Error::config("operator probabilities must be in [0,1]"));
        }
        if self.p_cross + self.p_targeted > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "p_cross + p_targeted must be <= 1, got {}",
                self.p_cross + self.p_targeted
            )));
        }
        if self.freeze_embeddings && self.p_targeted > 0.0 {
            return Err(Error::config(
                "freeze_embeddings requires p_targeted = 0 (targeted mutation evolves embeddings)",
            ));
        }
        if !(0.0 < self.reeval_fraction && self.reeval_fraction <= 1.0) {
            return Err(Error::config(format!(
                "reeval_fraction must be in (0,1], got {}",
                self.reeval_fraction
            )));
        }
        if self.reeval_period == 0 {
            return Err(Error::config("reeval_period must be >= 1"));
        }
        if self.mutation.sigma0 <= 0.0 || !self.mutation.sigma0.is_finite() {
            return Err(Error::config(format!(
                "mutation.sigma0 must be positive, got {}",
                self.mutation.sigma0
            )));
        }
        if self.mutation.window == 0 {
            return Err(Error::config("mutation.window must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation.p_target_success) {
            return Err(Error::config(
                "mutation.p_target_success must be in [0,1]",
            ));
        }
        self.targeted.validate(self.n_tokens * self.dim)?;

        match &self.vocab {
            VocabSource::Generated { size, scale } => {
                if *size < 2 {
                    return Err(Error::config("vocab.size must be >= 2"));
                }
                if *scale <= 0.0 || !scale.is_finite() {
                    return Err(Error::config("vocab.scale must be positive"));
                }
            }
            VocabSource::File { path } => {
                if path.is_empty() {
                    return Err(Error::config("vocab.path must not be empty"));
                }
            }
            VocabSource::Remote => {
                if !matches!(self.backend, BackendSpec::Remote) {
                    return Err(Error::config("vocab.source = remote needs backend.kind = remote"));
                }
            }
        }

        match &self.reference {
            ReferenceSource::Sampled { size } => {
                if *size < self.cells {
                    return Err(Error::config(format!(
                        "reference.size ({size}) must be >= cells ({})",
                        self.cells
                    )));
                }
            }
            ReferenceSource::File { path } => {
                if path.is_empty() {
                    return Err(Error::config("reference.path must not be empty"));
                }
            }
        }

        match (&self.behavior, &self.backend) {
            (BehaviorSpec::Codec { d_s }, BackendSpec::Synthetic { config }) => {
                if *d_s == 0 || *d_s >= config.behavior_dim {
                    return Err(Error::config(format!(
                        "codec behavior split needs 1 <= d_s < behavior_dim ({})",
                        config.behavior_dim
                    )));
                }
            }
            (BehaviorSpec::Codec { .. }, _) => {
                return Err(Error::config(
                    "behavior.kind = codec requires the synthetic backend",
                ));
            }
            (BehaviorSpec::Hybrid { d_s, reference_texts, .. }, _) => {
                if *d_s == 0 {
                    return Err(Error::config("hybrid d_s must be >= 1"));
                }
                if reference_texts.is_empty() {
                    return Err(Error::config("behavior.reference_texts must not be empty"));
                }
            }
        }

        if let BackendSpec::Synthetic { config } = &self.backend {
            config.validate()?;
            if config.n_tokens != self.n_tokens || config.dim != self.dim {
                return Err(Error::config(format!(
                    "synthetic landscape expects {}x{} genomes but the engine is configured for {}x{}",
                    config.n_tokens, config.dim, self.n_tokens, self.dim
                )));
            }
        }
        if let BackendSpec::Fixture { path } = &self.backend {
            if path.is_empty() {
                return Err(Error::config("backend.path must not be empty"));
            }
        }
        Ok(())
    }
}
