//! Deterministic named RNG substreams.
//!
//! All randomness in a run flows from one master seed through named streams
//! (`init`, `selection`, `operators`, `noise`). Streams are independent, so
//! extra draws in one subsystem never shift the sequence seen by another.
//! Stream state serializes, which is what makes checkpoint/resume bit-exact.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Stable 64-bit FNV-1a. Used to map stream names to ChaCha stream ids;
/// must never change once runs are being reproduced.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// A seeded stream keyed by `(master_seed, name)`.
pub fn named_stream(master_seed: u64, name: &str) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a64(name.as_bytes()));
    rng
}

/// The engine's substreams.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RngStreams {
    /// Vocabulary generation, centroid init, initial population.
    pub init: ChaCha12Rng,
    /// Parent and re-evaluation cell sampling.
    pub selection: ChaCha12Rng,
    /// Operator draws, mutation noise, gradient directions.
    pub operators: ChaCha12Rng,
    /// Backend evaluation noise (synthetic landscape).
    pub noise: ChaCha12Rng,
}

impl RngStreams {
    pub fn from_master(seed: u64) -> Self {
        RngStreams {
            init: named_stream(seed, "init"),
            selection: named_stream(seed, "selection"),
            operators: named_stream(seed, "operators"),
            noise: named_stream(seed, "noise"),
        }
    }
}
