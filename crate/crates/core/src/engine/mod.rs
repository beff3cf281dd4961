//! Run orchestration: selection, operator scheduling, evaluation, placement,
//! sigma adaptation, periodic re-evaluation, and checkpointing.

pub mod config;
pub mod runlog;

use crate::archive::{Archive, Candidate};
use crate::behavior::code::{code_features, FeatureNormalizer};
use crate::behavior::semantic::{
    EmbedderSpec, SemanticPipeline, SemanticPipelineState, TextEmbedder,
};
use crate::behavior::writing::{writing_features, Lexicons};
use crate::behavior::{fuse, BehaviorDescriptor};
use crate::error::{Error, Result};
use crate::generation::remote::{RemoteBackend, RemoteEmbedder};
use crate::generation::synthetic::{SyntheticLandscape, TextCodec};
use crate::generation::{GenerationMode, GenerationRequest, GeneratorBackend, RecombineRequest};
use crate::genome::{init_embedding, project_to_vocab, PromptEmbedding, VocabularyTable};
use crate::rng::RngStreams;
use crate::variation::{
    crossover, estimate_behavior_gradient, exploratory_mutation, targeted_mutation, MutationState,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

pub use config::{
    BackendSpec, BehaviorSpec, EngineConfig, ExplicitKind, MutationParams, ReferenceSource,
    VocabSource,
};
pub use runlog::{OperatorKind, OutcomeKind, RunRecord};

const CHECKPOINT_MAGIC: &[u8; 8] = b"QDENGCP1";
const CHECKPOINT_VERSION: u32 = 1;

/// Generator and fitness call totals. `init_*` freeze the cost of
/// initialization; loop costs are the difference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounters {
    pub generator_calls: u64,
    pub fitness_calls: u64,
    pub init_generator_calls: u64,
    pub init_fitness_calls: u64,
}

/// Text-to-descriptor path. Codec mode reads behavior straight out of
/// synthetic codec text; hybrid mode runs the semantic pipeline plus
/// explicit features.
pub enum Describer {
    Codec {
        codec: TextCodec,
        d_s: usize,
        alpha: f64,
    },
    Hybrid {
        pipeline: SemanticPipeline,
        explicit: ExplicitKind,
        lexicons: Lexicons,
        normalizer: FeatureNormalizer,
        alpha: f64,
    },
}

/// Serializable identity of a `Describer` for checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DescriberState {
    Codec {
        codec: TextCodec,
        d_s: usize,
        alpha: f64,
    },
    Hybrid {
        pipeline: SemanticPipelineState,
        explicit: ExplicitKind,
        normalizer: FeatureNormalizer,
        alpha: f64,
    },
}

impl Describer {
    /// Full descriptor plus raw explicit features (code mode keeps raw
    /// complexity/loc so reports can renormalize later).
    pub fn describe(&self, text: &str) -> Result<(BehaviorDescriptor, Option<Vec<f64>>)> {
        match self {
            Describer::Codec { codec, d_s, alpha } => {
                let decoded = codec.decode(text)?;
                let (sem, exp) = decoded.split_at(*d_s);
                Ok((fuse(sem.to_vec(), exp.to_vec(), *alpha)?, None))
            }
            Describer::Hybrid {
                pipeline,
                explicit,
                lexicons,
                normalizer,
                alpha,
            } => {
                let semantic = pipeline.descriptor(text)?;
                let (explicit_vec, raw) = match explicit {
                    ExplicitKind::Code => {
                        let features = code_features(text);
                        normalizer.observe(&features);
                        let raw = vec![features.complexity_raw, features.loc_raw];
                        (features.normalized(normalizer), Some(raw))
                    }
                    ExplicitKind::Writing => {
                        (writing_features(text, lexicons)?.normalized(), None)
                    }
                };
                Ok((fuse(semantic, explicit_vec, *alpha)?, raw))
            }
        }
    }

    pub fn fused(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.describe(text)?.0.fused)
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Describer::Codec { alpha, .. } | Describer::Hybrid { alpha, .. } => *alpha,
        }
    }

    pub fn semantic_dim(&self) -> usize {
        match self {
            Describer::Codec { d_s, .. } => *d_s,
            Describer::Hybrid { pipeline, .. } => pipeline.output_dim(),
        }
    }

    pub fn explicit_kind_name(&self) -> &'static str {
        match self {
            Describer::Codec { .. } => "codec",
            Describer::Hybrid { explicit: ExplicitKind::Code, .. } => "code",
            Describer::Hybrid { explicit: ExplicitKind::Writing, .. } => "writing",
        }
    }

    pub fn normalizer_maxima(&self) -> (f64, f64) {
        match self {
            Describer::Codec { .. } => (1.0, 1.0),
            Describer::Hybrid { normalizer, .. } => {
                (normalizer.max_complexity(), normalizer.max_loc())
            }
        }
    }

    fn state(&self) -> DescriberState {
        match self {
            Describer::Codec { codec, d_s, alpha } => DescriberState::Codec {
                codec: codec.clone(),
                d_s: *d_s,
                alpha: *alpha,
            },
            Describer::Hybrid {
                pipeline,
                explicit,
                normalizer,
                alpha,
                ..
            } => DescriberState::Hybrid {
                pipeline: pipeline.state(),
                explicit: explicit.clone(),
                normalizer: normalizer.clone(),
                alpha: *alpha,
            },
        }
    }

    fn from_state(state: DescriberState, remote: Option<&Arc<RemoteBackend>>) -> Result<Self> {
        match state {
            DescriberState::Codec { codec, d_s, alpha } => Ok(Describer::Codec { codec, d_s, alpha }),
            DescriberState::Hybrid {
                pipeline,
                explicit,
                normalizer,
                alpha,
            } => {
                let remote_embedder = remote_embedder_for(&pipeline.spec, remote)?;
                Ok(Describer::Hybrid {
                    pipeline: SemanticPipeline::from_state(pipeline, remote_embedder)?,
                    explicit,
                    lexicons: Lexicons::bundled(),
                    normalizer,
                    alpha,
                })
            }
        }
    }
}

fn remote_embedder_for(
    spec: &EmbedderSpec,
    remote: Option<&Arc<RemoteBackend>>,
) -> Result<Option<Arc<dyn TextEmbedder>>> {
    match spec {
        EmbedderSpec::HashNgram { .. } => Ok(None),
        EmbedderSpec::Remote { dim } => {
            let backend = remote.ok_or_else(|| {
                Error::config("remote embedder requires the remote backend")
            })?;
            Ok(Some(Arc::new(RemoteEmbedder::new(Arc::clone(backend), *dim))))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EngineState {
    version: u32,
    cfg: EngineConfig,
    vocab: VocabularyTable,
    archive: Archive,
    mutation: MutationState,
    streams: RngStreams,
    iteration: u64,
    records: Vec<RunRecord>,
    counters: CallCounters,
    request_counter: u64,
    describer: DescriberState,
}

/// Final-run summary written to metrics.json by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub seed: u64,
    pub budget: u64,
    pub iterations_completed: u64,
    pub qd_score: f64,
    pub coverage: f64,
    pub occupied: usize,
    pub cells: usize,
    pub tau: f64,
    pub sigma_p: f64,
    pub generator_calls: u64,
    pub fitness_calls: u64,
    pub init_generator_calls: u64,
    pub init_fitness_calls: u64,
}

pub struct Engine {
    cfg: EngineConfig,
    backend: Arc<dyn GeneratorBackend>,
    describer: Describer,
    vocab: VocabularyTable,
    archive: Archive,
    mutation: MutationState,
    streams: RngStreams,
    iteration: u64,
    records: Vec<RunRecord>,
    counters: CallCounters,
    request_counter: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let mut streams = RngStreams::from_master(cfg.seed);

        // Remote handle first: vocab may come from the wire.
        let remote = match &cfg.backend {
            BackendSpec::Remote => Some(Arc::new(RemoteBackend::from_env()?)),
            _ => None,
        };

        let vocab = match &cfg.vocab {
            VocabSource::Generated { size, scale } => {
                VocabularyTable::generated(*size, cfg.dim, *scale, &mut streams.init)?
            }
            VocabSource::File { path } => VocabularyTable::load(Path::new(path))?,
            VocabSource::Remote => remote
                .as_ref()
                .ok_or_else(|| Error::config("vocab.source = remote needs the remote backend"))?
                .fetch_vocab()?,
        };
        if vocab.dim() != cfg.dim {
            return Err(Error::Dimension {
                context: "vocabulary dim vs engine dim",
                expected: cfg.dim,
                actual: vocab.dim(),
            });
        }

        let backend: Arc<dyn GeneratorBackend> = match &cfg.backend {
            BackendSpec::Synthetic { config } => {
                Arc::new(SyntheticLandscape::new(config.clone())?.with_vocab(vocab.clone()))
            }
            BackendSpec::Remote => Arc::clone(remote.as_ref().expect("remote built above")) as _,
            BackendSpec::Fixture { path } => Arc::new(
                crate::generation::fixture::RecordedBackend::from_file(Path::new(path))?,
            ),
        };

        let describer = match &cfg.behavior {
            BehaviorSpec::Codec { d_s } => {
                let BackendSpec::Synthetic { config } = &cfg.backend else {
                    return Err(Error::config("codec behavior requires the synthetic backend"));
                };
                Describer::Codec {
                    codec: TextCodec {
                        behavior_dim: config.behavior_dim,
                        quantization: config.quantization,
                    },
                    d_s: *d_s,
                    alpha: cfg.alpha,
                }
            }
            BehaviorSpec::Hybrid {
                d_s,
                embedder,
                explicit,
                reference_texts,
            } => {
                let raw = std::fs::read_to_string(reference_texts)?;
                let texts: Vec<String> = raw
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect();
                let pipeline = match embedder {
                    EmbedderSpec::HashNgram { .. } => SemanticPipeline::fit_hash_ngram(
                        &texts,
                        *d_s,
                        cfg.seed,
                        reference_texts.clone(),
                    )?,
                    EmbedderSpec::Remote { dim } => {
                        let handle = remote_embedder_for(embedder, remote.as_ref())?
                            .expect("remote spec yields a handle");
                        let vectors: Vec<Vec<f64>> = texts
                            .iter()
                            .map(|t| handle.embed(t))
                            .collect::<Result<_>>()?;
                        let reducer =
                            crate::behavior::semantic::fit_reducer(&vectors, *d_s, cfg.seed)?;
                        SemanticPipeline::new(
                            EmbedderSpec::Remote { dim: *dim },
                            handle,
                            reducer,
                            reference_texts.clone(),
                        )?
                    }
                };
                Describer::Hybrid {
                    pipeline,
                    explicit: explicit.clone(),
                    lexicons: Lexicons::bundled(),
                    normalizer: FeatureNormalizer::new(),
                    alpha: cfg.alpha,
                }
            }
        };

        let mutation = MutationState::new(
            cfg.mutation.sigma0,
            cfg.mutation.c_sigma,
            cfg.mutation.p_target_success,
            cfg.mutation.window,
        )?;

        let mut engine = Engine {
            cfg,
            backend,
            describer,
            vocab,
            // Placeholder; replaced right below once reference descriptors exist.
            archive: Archive::from_parts(vec![vec![0.0]], vec![None], 1, 1)?,
            mutation,
            streams,
            iteration: 0,
            records: Vec::new(),
            counters: CallCounters::default(),
            request_counter: 0,
        };
        engine.initialize()?;
        Ok(engine)
    }

    fn initialize(&mut self) -> Result<()> {
        let reference = match &self.cfg.reference {
            ReferenceSource::Sampled { size } => {
                let size = *size;
                let mut descriptors = Vec::with_capacity(size);
                for _ in 0..size {
                    let genome = init_embedding(
                        &self.vocab,
                        self.cfg.n_tokens,
                        self.cfg.init_sigma,
                        &mut self.streams.init,
                    )?;
                    let text = self.generate_text(&genome)?;
                    descriptors.push(self.describer.fused(&text)?);
                }
                descriptors
            }
            ReferenceSource::File { path } => {
                let raw = std::fs::read_to_string(path)?;
                serde_json::from_str::<Vec<Vec<f64>>>(&raw)?
            }
        };

        self.archive = Archive::from_reference(
            &reference,
            self.cfg.cells,
            self.cfg.max_cells,
            self.cfg.buffer_capacity,
            &mut self.streams.init,
        )?;

        let population = self.cfg.initial_population_size();
        for _ in 0..population {
            let genome = init_embedding(
                &self.vocab,
                self.cfg.n_tokens,
                self.cfg.init_sigma,
                &mut self.streams.init,
            )?;
            let text = self.generate_text(&genome)?;
            let (descriptor, explicit_raw) = self.describer.describe(&text)?;
            let fitness = self.evaluate_fitness(&text)?;
            let candidate = Candidate {
                text,
                embedding: genome,
                descriptor,
                explicit_raw,
                eval_count: 1,
            };
            self.archive.try_insert(candidate, fitness)?;
        }
        if self.archive.occupied() == 0 {
            return Err(Error::config("initial population left the archive empty"));
        }
        self.counters.init_generator_calls = self.counters.generator_calls;
        self.counters.init_fitness_calls = self.counters.fitness_calls;
        Ok(())
    }

    fn next_request_id(&mut self) -> (String, u64) {
        self.request_counter += 1;
        (format!("req-{:08}", self.request_counter), self.request_counter)
    }

    fn build_request(&self, p: &PromptEmbedding, id: String, seed: u64) -> Result<GenerationRequest> {
        match self.cfg.mode {
            GenerationMode::SoftPrompt => {
                Ok(GenerationRequest::soft_prompt(p.clone(), &self.cfg.task, id, seed))
            }
            GenerationMode::Projected => {
                let projection = project_to_vocab(p, &self.vocab)?;
                Ok(GenerationRequest::projected(projection.tokens, &self.cfg.task, id, seed))
            }
        }
    }

    fn generate_text(&mut self, p: &PromptEmbedding) -> Result<String> {
        let (id, seed) = self.next_request_id();
        let request = self.build_request(p, id, seed)?;
        self.counters.generator_calls += 1;
        self.backend
            .generate(&request, &mut self.streams.noise)
            .map(|g| g.text)
    }

    fn recombine_texts(&mut self, a: &str, b: &str) -> Result<String> {
        let (id, _) = self.next_request_id();
        let request = RecombineRequest {
            request_id: id,
            parent_a: a.to_string(),
            parent_b: b.to_string(),
            task: self.cfg.task.clone(),
        };
        self.counters.generator_calls += 1;
        self.backend
            .recombine(&request, &mut self.streams.noise)
            .map(|g| g.text)
    }

    fn evaluate_fitness(&mut self, text: &str) -> Result<f64> {
        let (id, _) = self.next_request_id();
        self.counters.fitness_calls += 1;
        self.backend
            .evaluate_fitness(text, &self.cfg.task, &id, &mut self.streams.noise)
    }

    /// Uniform draw over occupied cells.
    pub fn select_parent(&mut self) -> Result<(usize, Candidate)> {
        let occupied = self.archive.occupied_indices();
        if occupied.is_empty() {
            return Err(Error::config("cannot select a parent from an empty archive"));
        }
        let cell = occupied[self.streams.selection.random_range(0..occupied.len())];
        Ok((cell, self.archive.cell(cell).expect("occupied").candidate.clone()))
    }

    /// Second parent for crossover: one uniform redraw when it collides with
    /// the first, then accepted either way.
    fn select_partner(&mut self, first_cell: usize) -> Result<(usize, Candidate)> {
        let (cell, candidate) = self.select_parent()?;
        if cell == first_cell {
            return self.select_parent();
        }
        Ok((cell, candidate))
    }

    /// Run one iteration of the steady-state loop.
    pub fn step(&mut self) -> Result<&RunRecord> {
        if self.iteration >= self.cfg.budget {
            return Err(Error::config("budget exhausted"));
        }
        let iteration = self.iteration + 1;
        let calls_before = self.counters.generator_calls;

        let (parent_cell, parent) = self.select_parent()?;

        let u1: f64 = self.streams.operators.random();
        let (want_cross, want_targeted) = if self.cfg.operator_stacking {
            let u2: f64 = self.streams.operators.random();
            (u1 < self.cfg.p_cross, u2 < self.cfg.p_targeted)
        } else if u1 < self.cfg.p_cross {
            (true, false)
        } else {
            let u2: f64 = self.streams.operators.random();
            let conditional = if self.cfg.p_cross < 1.0 {
                self.cfg.p_targeted / (1.0 - self.cfg.p_cross)
            } else {
                0.0
            };
            (false, u2 < conditional)
        };

        let proposal = self.propose(parent_cell, &parent, want_cross, want_targeted);
        let (operator, evaluated) = match proposal {
            Ok((operator, text, embedding)) => {
                let evaluated = self.evaluate_candidate(text, embedding);
                (operator, evaluated)
            }
            Err(ProposeError { operator, error }) => {
                if error.is_retryable() {
                    return Err(error); // backend hard-down: abort the run
                }
                (operator, Err(error))
            }
        };

        let outcome = match evaluated {
            Ok((candidate, fitness)) => match self.archive.try_insert(candidate, fitness) {
                Ok(outcome) => {
                    self.mutation.record(outcome.improved_archive());
                    OutcomeKind::from(outcome)
                }
                Err(error) => {
                    if error.is_retryable() {
                        return Err(error);
                    }
                    self.mutation.record(false);
                    OutcomeKind::Failed
                }
            },
            Err(error) => {
                if error.is_retryable() {
                    return Err(error);
                }
                self.mutation.record(false);
                OutcomeKind::Failed
            }
        };
        self.mutation.adapt()?;

        if iteration % self.cfg.reeval_period == 0 && self.archive.occupied() > 0 {
            self.reevaluate()?;
        }

        self.records.push(RunRecord {
            iteration,
            operator,
            outcome,
            qd_score: self.archive.qd_score(),
            coverage: self.archive.coverage(),
            occupied: self.archive.occupied(),
            sigma_p: self.mutation.sigma(),
            generator_calls: self.counters.generator_calls - calls_before,
        });
        self.iteration = iteration;
        Ok(self.records.last().expect("just pushed"))
    }

    /// Produce the offspring text and embedding for this iteration.
    fn propose(
        &mut self,
        parent_cell: usize,
        parent: &Candidate,
        want_cross: bool,
        want_targeted: bool,
    ) -> std::result::Result<(OperatorKind, String, PromptEmbedding), ProposeError> {
        if self.cfg.operator_stacking {
            return self.propose_stacked(parent_cell, parent, want_cross, want_targeted);
        }
        if want_cross {
            return self.propose_crossover(parent_cell, parent);
        }
        if want_targeted {
            if let Some(result) = self.propose_targeted(parent) {
                return result;
            }
            // No empty cell to target: exploratory instead.
        }
        self.propose_exploratory(parent)
    }

    fn propose_crossover(
        &mut self,
        parent_cell: usize,
        parent: &Candidate,
    ) -> std::result::Result<(OperatorKind, String, PromptEmbedding), ProposeError> {
        let operator = OperatorKind::Crossover;
        let wrap = |error: Error| ProposeError { operator, error };
        let (_, partner) = self.select_partner(parent_cell).map_err(wrap)?;
        let embedding = if self.cfg.freeze_embeddings {
            parent.embedding.clone()
        } else {
            crossover(&parent.embedding, &partner.embedding, &mut self.streams.operators)
                .map_err(wrap)?
        };
        let text = self.recombine_texts(&parent.text, &partner.text).map_err(wrap)?;
        Ok((operator, text, embedding))
    }

    /// Returns None when the archive has no empty cell to aim at.
    fn propose_targeted(
        &mut self,
        parent: &Candidate,
    ) -> Option<std::result::Result<(OperatorKind, String, PromptEmbedding), ProposeError>> {
        let (target_cell, _) = self
            .archive
            .nearest_empty_centroid(&parent.descriptor.fused)?;
        let target_delta: Vec<f64> = self
            .archive
            .centroid(target_cell)
            .iter()
            .zip(&parent.descriptor.fused)
            .map(|(c, b)| c - b)
            .collect();
        Some(self.run_targeted(parent, &target_delta))
    }

    fn run_targeted(
        &mut self,
        parent: &Candidate,
        target_delta: &[f64],
    ) -> std::result::Result<(OperatorKind, String, PromptEmbedding), ProposeError> {
        let wrap = |error: Error| ProposeError {
            operator: OperatorKind::Targeted,
            error,
        };

        // Destructure so the generation closure and the operator RNG can
        // borrow disjoint fields simultaneously.
        let backend = Arc::clone(&self.backend);
        let mode = self.cfg.mode;
        let task = self.cfg.task.clone();
        let vocab = &self.vocab;
        let describer = &self.describer;
        let request_counter = &mut self.request_counter;
        let generator_calls = &mut self.counters.generator_calls;
        let noise = &mut self.streams.noise;

        let mut generate = |p: &PromptEmbedding| -> Result<String> {
            *request_counter += 1;
            *generator_calls += 1;
            let id = format!("req-{:08}", *request_counter);
            let request = match mode {
                GenerationMode::SoftPrompt => {
                    GenerationRequest::soft_prompt(p.clone(), task.clone(), id, *request_counter)
                }
                GenerationMode::Projected => {
                    let projection = project_to_vocab(p, vocab)?;
                    GenerationRequest::projected(projection.tokens, task.clone(), id, *request_counter)
                }
            };
            backend.generate(&request, noise).map(|g| g.text)
        };
        let mut describe = |text: &str| describer.fused(text);

        let estimate = estimate_behavior_gradient(
            &parent.embedding,
            &mut generate,
            &mut describe,
            &self.cfg.targeted,
            &mut self.streams.operators,
        )
        .map_err(wrap)?;

        let mutated = targeted_mutation(
            &parent.embedding,
            target_delta,
            &estimate,
            self.cfg.targeted.gamma,
            self.mutation.sigma(),
            &mut self.streams.operators,
        )
        .map_err(wrap)?;

        let operator = if mutated.fell_back {
            OperatorKind::TargetedFallback
        } else {
            OperatorKind::Targeted
        };
        let text = self
            .generate_text(&mutated.offspring)
            .map_err(|error| ProposeError { operator, error })?;
        Ok((operator, text, mutated.offspring))
    }

    fn propose_exploratory(
        &mut self,
        parent: &Candidate,
    ) -> std::result::Result<(OperatorKind, String, PromptEmbedding), ProposeError> {
        let operator = OperatorKind::Exploratory;
        let wrap = |error: Error| ProposeError { operator, error };
        let embedding = if self.cfg.freeze_embeddings {
            parent.embedding.clone()
        } else {
            exploratory_mutation(
                &parent.embedding,
                self.mutation.sigma(),
                &mut self.streams.operators,
            )
            .map_err(wrap)?
        };
        let text = self.generate_text(&embedding).map_err(wrap)?;
        Ok((operator, text, embedding))
    }

    /// Stacked mode (behind `operator_stacking`): crossover optionally
    /// produces the base embedding, then a mutation always applies and the
    /// final embedding is regenerated.
    fn propose_stacked(
        &mut self,
        parent_cell: usize,
        parent: &Candidate,
        want_cross: bool,
        want_targeted: bool,
    ) -> std::result::Result<(OperatorKind, String, PromptEmbedding), ProposeError> {
        let base = if want_cross {
            let wrap = |error: Error| ProposeError {
                operator: OperatorKind::Crossover,
                error,
            };
            let (_, partner) = self.select_partner(parent_cell).map_err(wrap)?;
            // The recombined text only matters as crossover output when no
            // mutation follows; in stacked mode the final text is always
            // regenerated, but the call is still made (and charged).
            let _ = self.recombine_texts(&parent.text, &partner.text).map_err(wrap)?;
            if self.cfg.freeze_embeddings {
                parent.embedding.clone()
            } else {
                crossover(&parent.embedding, &partner.embedding, &mut self.streams.operators)
                    .map_err(wrap)?
            }
        } else {
            parent.embedding.clone()
        };
        let staged = Candidate {
            embedding: base,
            ..parent.clone()
        };
        if want_targeted {
            if let Some(result) = self.propose_targeted(&staged) {
                return result;
            }
        }
        self.propose_exploratory(&staged)
    }

    fn evaluate_candidate(
        &mut self,
        text: String,
        embedding: PromptEmbedding,
    ) -> Result<(Candidate, f64)> {
        let (descriptor, explicit_raw) = self.describer.describe(&text)?;
        let fitness = self.evaluate_fitness(&text)?;
        Ok((
            Candidate {
                text,
                embedding,
                descriptor,
                explicit_raw,
                eval_count: 1,
            },
            fitness,
        ))
    }

    fn reevaluate(&mut self) -> Result<()> {
        let backend = Arc::clone(&self.backend);
        let task = self.cfg.task.clone();
        let request_counter = &mut self.request_counter;
        let fitness_calls = &mut self.counters.fitness_calls;
        let noise = &mut self.streams.noise;
        let mut evaluator = |candidate: &Candidate| -> Result<f64> {
            *request_counter += 1;
            *fitness_calls += 1;
            let id = format!("req-{:08}", *request_counter);
            backend.evaluate_fitness(&candidate.text, &task, &id, noise)
        };
        self.archive.reevaluate_elites(
            self.cfg.reeval_fraction,
            &mut evaluator,
            &mut self.streams.selection,
        )?;
        Ok(())
    }

    /// Run `steps` iterations (or to budget, whichever is sooner).
    pub fn run_steps(&mut self, steps: u64) -> Result<()> {
        let target = (self.iteration + steps).min(self.cfg.budget);
        while self.iteration < target {
            self.step()?;
        }
        Ok(())
    }

    pub fn run_to_budget(&mut self) -> Result<()> {
        while self.iteration < self.cfg.budget {
            self.step()?;
        }
        Ok(())
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn describer(&self) -> &Describer {
        &self.describer
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn counters(&self) -> &CallCounters {
        &self.counters
    }

    pub fn mutation_sigma(&self) -> f64 {
        self.mutation.sigma()
    }

    pub fn summary(&self) -> EngineSummary {
        EngineSummary {
            seed: self.cfg.seed,
            budget: self.cfg.budget,
            iterations_completed: self.iteration,
            qd_score: self.archive.qd_score(),
            coverage: self.archive.coverage(),
            occupied: self.archive.occupied(),
            cells: self.archive.len(),
            tau: self.archive.tau(),
            sigma_p: self.mutation.sigma(),
            generator_calls: self.counters.generator_calls,
            fitness_calls: self.counters.fitness_calls,
            init_generator_calls: self.counters.init_generator_calls,
            init_fitness_calls: self.counters.init_fitness_calls,
        }
    }

    /// Serialize full engine state (versioned binary with a magic header).
    pub fn checkpoint(&self, path: &Path) -> Result<()> {
        let state = EngineState {
            version: CHECKPOINT_VERSION,
            cfg: self.cfg.clone(),
            vocab: self.vocab.clone(),
            archive: self.archive.clone(),
            mutation: self.mutation.clone(),
            streams: self.streams.clone(),
            iteration: self.iteration,
            records: self.records.clone(),
            counters: self.counters,
            request_counter: self.request_counter,
            describer: self.describer.state(),
        };
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let payload = serde_json::to_vec(&state)
            .map_err(|e| Error::Checkpoint(format!("serialization failed: {e}")))?;
        bytes.extend_from_slice(&payload);
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Restore a checkpoint. The backend is rebuilt from config (and the
    /// environment, for remote runs); all mutable state round-trips exactly.
    pub fn resume(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < CHECKPOINT_MAGIC.len() + 4 {
            return Err(Error::Checkpoint("file too short to be a checkpoint".into()));
        }
        let (magic, rest) = bytes.split_at(CHECKPOINT_MAGIC.len());
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic header".into()));
        }
        let (version_bytes, payload) = rest.split_at(4);
        let version = u32::from_le_bytes(version_bytes.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let state: EngineState = serde_json::from_slice(payload)
            .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint payload: {e}")))?;
        if state.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint("inconsistent version fields".into()));
        }
        state.cfg.validate()?;

        let remote = match &state.cfg.backend {
            BackendSpec::Remote => Some(Arc::new(RemoteBackend::from_env()?)),
            _ => None,
        };
        let backend: Arc<dyn GeneratorBackend> = match &state.cfg.backend {
            BackendSpec::Synthetic { config } => Arc::new(
                SyntheticLandscape::new(config.clone())?.with_vocab(state.vocab.clone()),
            ),
            BackendSpec::Remote => Arc::clone(remote.as_ref().expect("built above")) as _,
            BackendSpec::Fixture { path } => Arc::new(
                crate::generation::fixture::RecordedBackend::from_file(Path::new(path))?,
            ),
        };
        let describer = Describer::from_state(state.describer, remote.as_ref())?;
        Ok(Engine {
            cfg: state.cfg,
            backend,
            describer,
            vocab: state.vocab,
            archive: state.archive,
            mutation: state.mutation,
            streams: state.streams,
            iteration: state.iteration,
            records: state.records,
            counters: state.counters,
            request_counter: state.request_counter,
        })
    }
}

struct ProposeError {
    operator: OperatorKind,
    error: Error,
}
