//! Recorded-fixture backend: replays canned responses for offline tests.
//!
//! The fixture file is JSON with per-endpoint FIFO queues plus optional
//! defaults used once a queue runs dry:
//!
//! ```json
//! {
//!   "generate": [{"text": "bhv 0.5 0.5 0.5 0.5"}],
//!   "generate_default": {"text": "bhv 0.1 0.1 0.1 0.1"},
//!   "recombine": [], "recombine_default": {"text": "..."},
//!   "fitness": [{"value": 0.75}], "fitness_default": {"value": 0.5}
//! }
//! ```

use crate::error::{Error, Result};
use crate::generation::protocol::{GenerationRequest, Generated, RecombineRequest};
use crate::generation::GeneratorBackend;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct FixtureFile {
    #[serde(default)]
    pub generate: Vec<Generated>,
    #[serde(default)]
    pub generate_default: Option<Generated>,
    #[serde(default)]
    pub recombine: Vec<Generated>,
    #[serde(default)]
    pub recombine_default: Option<Generated>,
    #[serde(default)]
    pub fitness: Vec<f64>,
    #[serde(default)]
    pub fitness_default: Option<f64>,
}

pub struct RecordedBackend {
    generate: Mutex<VecDeque<Generated>>,
    generate_default: Option<Generated>,
    recombine: Mutex<VecDeque<Generated>>,
    recombine_default: Option<Generated>,
    fitness: Mutex<VecDeque<f64>>,
    fitness_default: Option<f64>,
}

impl RecordedBackend {
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let file: FixtureFile = serde_json::from_str(&raw)?;
        Ok(Self::from_fixture(file))
    }

    pub fn from_fixture(file: FixtureFile) -> Self {
        RecordedBackend {
            generate: Mutex::new(file.generate.into()),
            generate_default: file.generate_default,
            recombine: Mutex::new(file.recombine.into()),
            recombine_default: file.recombine_default,
            fitness: Mutex::new(file.fitness.into()),
            fitness_default: file.fitness_default,
        }
    }

    fn next<T: Clone>(
        queue: &Mutex<VecDeque<T>>,
        fallback: &Option<T>,
        endpoint: &str,
        request_id: &str,
    ) -> Result<T> {
        if let Some(item) = queue.lock().expect("fixture lock").pop_front() {
            return Ok(item);
        }
        fallback.clone().ok_or_else(|| Error::Backend {
            request_id: Some(request_id.to_string()),
            retryable: false,
            message: format!("fixture queue for {endpoint} is exhausted and has no default"),
        })
    }
}

impl GeneratorBackend for RecordedBackend {
    fn generate(&self, request: &GenerationRequest, _rng: &mut dyn rand::RngCore) -> Result<Generated> {
        request.validate()?;
        Self::next(&self.generate, &self.generate_default, "generate", &request.request_id)
    }

    fn recombine(&self, request: &RecombineRequest, _rng: &mut dyn rand::RngCore) -> Result<Generated> {
        Self::next(&self.recombine, &self.recombine_default, "recombine", &request.request_id)
    }

    fn evaluate_fitness(
        &self,
        _text: &str,
        _task: &str,
        request_id: &str,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<f64> {
        Self::next(&self.fitness, &self.fitness_default, "fitness", request_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::PromptEmbedding;
    use crate::rng::named_stream;

    #[test]
    fn replays_in_order_then_falls_back_to_default() {
        let backend = RecordedBackend::from_fixture(FixtureFile {
            generate: vec![Generated { text: "first".into(), model_id: None, usage: None }],
            generate_default: Some(Generated { text: "later".into(), model_id: None, usage: None }),
            fitness: vec![0.9],
            fitness_default: Some(0.5),
            ..FixtureFile::default()
        });
        let p = PromptEmbedding::new(1, 2, vec![0.0, 0.0]).unwrap();
        let request = GenerationRequest::soft_prompt(p, "t", "req-0", 0);
        let mut rng = named_stream(0, "noise");
        assert_eq!(backend.generate(&request, &mut rng).unwrap().text, "first");
        assert_eq!(backend.generate(&request, &mut rng).unwrap().text, "later");
        assert_eq!(backend.generate(&request, &mut rng).unwrap().text, "later");
        assert_eq!(backend.evaluate_fitness("x", "t", "req-1", &mut rng).unwrap(), 0.9);
        assert_eq!(backend.evaluate_fitness("x", "t", "req-2", &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn exhausted_queue_without_default_is_an_error() {
        let backend = RecordedBackend::from_fixture(FixtureFile::default());
        let request = RecombineRequest {
            request_id: "req-9".into(),
            parent_a: "a".into(),
            parent_b: "b".into(),
            task: "t".into(),
        };
        let mut rng = named_stream(0, "noise");
        assert!(backend.recombine(&request, &mut rng).is_err());
    }
}
