//! Prompt-conditioned generator backends.
//!
//! The engine talks to every backend through one trait: a deterministic
//! synthetic landscape for desk-scale verification, an HTTP client speaking
//! the wire protocol in `protocol`, and a recorded-fixture player for
//! offline tests.

pub mod fixture;
pub mod protocol;
pub mod remote;
pub mod synthetic;

use crate::error::Result;
use rand::RngCore;

pub use protocol::{GenerationMode, GenerationRequest, Generated, RecombineRequest};

/// A text generator plus fitness service.
///
/// Backends are safe for concurrent calls; the `rng` parameter carries the
/// engine's noise substream so stochastic backends stay checkpointable. The
/// remote backend ignores it (stochasticity lives server-side).
pub trait GeneratorBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest, rng: &mut dyn RngCore) -> Result<Generated>;

    fn recombine(&self, request: &RecombineRequest, rng: &mut dyn RngCore) -> Result<Generated>;

    fn evaluate_fitness(
        &self,
        text: &str,
        task: &str,
        request_id: &str,
        rng: &mut dyn RngCore,
    ) -> Result<f64>;
}
