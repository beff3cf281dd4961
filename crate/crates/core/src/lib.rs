//! Quality-diversity optimization over prompt embeddings.
//!
//! The engine evolves compact prompt-embedding matrices that steer a
//! pluggable text generator, maintaining a CVT archive of behaviorally
//! diverse, high-fitness (text, embedding) solutions. Behavior descriptors
//! fuse a semantic pipeline with explicit code or writing features;
//! evaluation noise is handled by buffered medians and periodic elite
//! re-evaluation.

pub mod archive;
pub mod behavior;
pub mod engine;
pub mod error;
pub mod generation;
pub mod genome;
pub mod kmeans;
pub(crate) mod math;
pub mod metrics;
pub mod rng;
pub mod snapshot;
pub mod variation;

pub use archive::{Archive, Candidate, EliteSlot, InsertOutcome};
pub use engine::{Engine, EngineConfig, EngineSummary};
pub use error::{Error, Result};
pub use genome::{PromptEmbedding, VocabularyTable};
