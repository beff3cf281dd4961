//! Variation operators: adaptive-strength exploratory mutation, targeted
//! behavioral mutation via finite-difference gradient estimation, embedding
//! crossover, and the landscape-smoothness diagnostic.

use crate::error::{Error, Result};
use crate::genome::PromptEmbedding;
use crate::math::{dot, mean, norm, sample_std};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 10.0;

/// Mutation-strength state under the success-rate rule:
/// `sigma' = sigma * exp(c_sigma * (p_succ - p_target))`, clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationState {
    sigma_p: f64,
    c_sigma: f64,
    p_target_success: f64,
    window: VecDeque<bool>,
    window_capacity: usize,
}

impl MutationState {
    pub fn new(sigma0: f64, c_sigma: f64, p_target_success: f64, window_capacity: usize) -> Result<Self> {
        if sigma0 <= 0.0 || !sigma0.is_finite() {
            return Err(Error::config(format!("sigma0 must be positive, got {sigma0}")));
        }
        if window_capacity == 0 {
            return Err(Error::config("success window must hold at least one entry"));
        }
        if !(0.0..=1.0).contains(&p_target_success) {
            return Err(Error::config(format!(
                "target success rate must be in [0,1], got {p_target_success}"
            )));
        }
        Ok(MutationState {
            sigma_p: sigma0.clamp(SIGMA_MIN, SIGMA_MAX),
            c_sigma,
            p_target_success,
            window: VecDeque::with_capacity(window_capacity),
            window_capacity,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_p
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn record(&mut self, improved: bool) {
        while self.window.len() >= self.window_capacity {
            self.window.pop_front();
        }
        self.window.push_back(improved);
    }

    pub fn success_rate(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().filter(|b| **b).count() as f64 / self.window.len() as f64
    }

    /// One adaptation step over the current window. Requires a non-empty
    /// window; log(sigma) moves by exactly `c_sigma * (p_succ - p_target)`
    /// before clamping.
    pub fn adapt(&mut self) -> Result<f64> {
        if self.window.is_empty() {
            return Err(Error::config("cannot adapt sigma with an empty success window"));
        }
        let p_succ = self.success_rate();
        self.sigma_p =
            (self.sigma_p * (self.c_sigma * (p_succ - self.p_target_success)).exp())
                .clamp(SIGMA_MIN, SIGMA_MAX);
        Ok(self.sigma_p)
    }
}

/// Gaussian perturbation of every entry; the caller regenerates text after.
pub fn exploratory_mutation(
    p: &PromptEmbedding,
    sigma_explore: f64,
    rng: &mut impl Rng,
) -> Result<PromptEmbedding> {
    if sigma_explore <= 0.0 || !sigma_explore.is_finite() {
        return Err(Error::config(format!(
            "sigma_explore must be positive, got {sigma_explore}"
        )));
    }
    let noise: Vec<f64> = (0..p.flat().len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    p.add_flat(&noise, sigma_explore)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetedMutationConfig {
    /// Finite-difference step.
    pub eta: f64,
    /// Number of probe directions (k generator calls plus one baseline).
    pub k_directions: usize,
    /// Update step size.
    pub gamma: f64,
}

impl Default for TargetedMutationConfig {
    fn default() -> Self {
        TargetedMutationConfig {
            eta: 0.01,
            k_directions: 8,
            gamma: 0.05,
        }
    }
}

impl TargetedMutationConfig {
    pub fn validate(&self, genome_len: usize) -> Result<()> {
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.k_directions == 0 || self.k_directions > genome_len {
            return Err(Error::config(format!(
                "k_directions must be in [1, n*d] = [1, {genome_len}], got {}",
                self.k_directions
            )));
        }
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::config(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Finite-difference estimate of how behavior responds along k orthonormal
/// random directions in embedding space.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    /// Unit-norm, mutually orthogonal probe directions (flattened genome space).
    pub directions: Vec<Vec<f64>>,
    /// Behavior deltas per surviving direction: `(b(p + eta e) - b(p)) / eta`.
    pub deltas: Vec<Vec<f64>>,
    pub baseline_behavior: Vec<f64>,
    /// Probe directions dropped because generation or description failed.
    pub dropped: usize,
    /// Generator calls consumed (baseline + one per attempted direction).
    pub generator_calls: u64,
}

/// Estimate directional behavior deltas around `p`.
///
/// `generate` maps an embedding to text; `describe` maps text to a behavior
/// vector. The baseline call must succeed; individual probe failures drop
/// that direction, and fewer than two survivors is an error.
pub fn estimate_behavior_gradient(
    p: &PromptEmbedding,
    generate: &mut dyn FnMut(&PromptEmbedding) -> Result<String>,
    describe: &mut dyn FnMut(&str) -> Result<Vec<f64>>,
    cfg: &TargetedMutationConfig,
    rng: &mut impl Rng,
) -> Result<GradientEstimate> {
    let len = p.flat().len();
    cfg.validate(len)?;

    let baseline_text = generate(p)?;
    let baseline_behavior = describe(&baseline_text)?;
    let mut calls: u64 = 1;

    let directions = orthonormal_directions(len, cfg.k_directions, rng);
    let mut kept_directions = Vec::with_capacity(cfg.k_directions);
    let mut deltas = Vec::with_capacity(cfg.k_directions);
    let mut dropped = 0usize;

    for direction in directions {
        let probe = p.add_flat(&direction, cfg.eta)?;
        calls += 1;
        let behavior = match generate(&probe).and_then(|text| describe(&text)) {
            Ok(b) => b,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        if behavior.len() != baseline_behavior.len() {
            return Err(Error::evaluation("behavior dimension changed between probes"));
        }
        let delta: Vec<f64> = behavior
            .iter()
            .zip(&baseline_behavior)
            .map(|(b, b0)| (b - b0) / cfg.eta)
            .collect();
        kept_directions.push(direction);
        deltas.push(delta);
    }

    if kept_directions.len() < 2 {
        return Err(Error::evaluation(format!(
            "gradient estimation kept {} of {} directions; need at least 2",
            kept_directions.len(),
            cfg.k_directions
        )));
    }

    Ok(GradientEstimate {
        directions: kept_directions,
        deltas,
        baseline_behavior,
        dropped,
        generator_calls: calls,
    })
}

/// Gaussian directions made orthonormal by Gram-Schmidt. Degenerate draws
/// (residual below 1e-12) are redrawn; k <= len guarantees termination.
fn orthonormal_directions(len: usize, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(k);
    while directions.len() < k {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for existing in &directions {
            let proj = dot(&v, existing);
            for (x, e) in v.iter_mut().zip(existing) {
                *x -= proj * e;
            }
        }
        let n = norm(&v);
        if n < 1e-12 {
            continue;
        }
        for x in &mut v {
            *x /= n;
        }
        directions.push(v);
    }
    directions
}

#[derive(Debug, Clone)]
pub struct TargetedMutationResult {
    pub offspring: PromptEmbedding,
    /// Set when all deltas were zero and the operator fell back to an
    /// exploratory perturbation.
    pub fell_back: bool,
}

/// Move `p` toward `target_delta_b` in behavior space: least-squares
/// coefficients over the sampled directions, coefficient norm clamped at
/// `10 / gamma` to bound steps from near-singular systems.
pub fn targeted_mutation(
    p: &PromptEmbedding,
    target_delta_b: &[f64],
    estimate: &GradientEstimate,
    gamma: f64,
    fallback_sigma: f64,
    rng: &mut impl Rng,
) -> Result<TargetedMutationResult> {
    let m = estimate.directions.len();
    if m < 2 {
        return Err(Error::evaluation("targeted mutation needs at least 2 directions"));
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::config(format!("gamma must be positive, got {gamma}")));
    }
    let b_dim = estimate.baseline_behavior.len();
    if target_delta_b.len() != b_dim {
        return Err(Error::Dimension {
            context: "targeted mutation target",
            expected: b_dim,
            actual: target_delta_b.len(),
        });
    }

    let max_delta = estimate
        .deltas
        .iter()
        .flat_map(|d| d.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max_delta < 1e-15 {
        let offspring = exploratory_mutation(p, fallback_sigma, rng)?;
        return Ok(TargetedMutationResult {
            offspring,
            fell_back: true,
        });
    }

    // Columns are the per-direction behavior deltas.
    let mut d = DMatrix::<f64>::zeros(b_dim, m);
    for (j, delta) in estimate.deltas.iter().enumerate() {
        for (i, v) in delta.iter().enumerate() {
            d[(i, j)] = *v;
        }
    }
    let target = nalgebra::DVector::from_column_slice(target_delta_b);
    let svd = d.svd(true, true);
    let mut coeffs = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::evaluation(format!("least-squares solve failed: {e}")))?;

    let max_norm = 10.0 / gamma;
    let coeff_norm = coeffs.norm();
    if coeff_norm > max_norm {
        coeffs *= max_norm / coeff_norm;
    }

    let mut update = vec![0.0; p.flat().len()];
    for (j, direction) in estimate.directions.iter().enumerate() {
        let a = coeffs[j];
        if a == 0.0 {
            continue;
        }
        for (u, e) in update.iter_mut().zip(direction) {
            *u += a * e;
        }
    }
    let offspring = p.add_flat(&update, gamma)?;
    Ok(TargetedMutationResult {
        offspring,
        fell_back: false,
    })
}

/// Embedding interpolation with `beta ~ Uniform(0.3, 0.7)`.
pub fn crossover(
    p1: &PromptEmbedding,
    p2: &PromptEmbedding,
    rng: &mut impl Rng,
) -> Result<PromptEmbedding> {
    let beta = rng.random_range(0.3..0.7);
    crossover_with_beta(p1, p2, beta)
}

pub fn crossover_with_beta(
    p1: &PromptEmbedding,
    p2: &PromptEmbedding,
    beta: f64,
) -> Result<PromptEmbedding> {
    p1.lerp(p2, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// std / |mean| of directional-derivative magnitudes; NaN when flat.
    pub cv: f64,
    /// Mean derivative magnitude fell below 1e-9.
    pub flat: bool,
    pub mean_magnitude: f64,
    pub surviving_probes: usize,
}

/// Coefficient of variation of fitness directional derivatives along random
/// unit directions. `fitness` is the full generate-and-score path.
pub fn smoothness_cv(
    p: &PromptEmbedding,
    fitness: &mut dyn FnMut(&PromptEmbedding) -> Result<f64>,
    n_probes: usize,
    eta: f64,
    rng: &mut impl Rng,
) -> Result<SmoothnessReport> {
    if n_probes < 30 {
        return Err(Error::config(format!(
            "smoothness diagnostic needs n_probes >= 30, got {n_probes}"
        )));
    }
    if eta <= 0.0 || !eta.is_finite() {
        return Err(Error::config(format!("eta must be positive, got {eta}")));
    }
    let f0 = fitness(p)?;
    let len = p.flat().len();
    let mut magnitudes = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        let mut direction: Vec<f64> =
            (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&direction);
        if n < 1e-12 {
            continue;
        }
        for x in &mut direction {
            *x /= n;
        }
        let probe = p.add_flat(&direction, eta)?;
        match fitness(&probe) {
            Ok(f) => magnitudes.push(((f - f0) / eta).abs()),
            Err(_) => continue,
        }
    }
    if magnitudes.len() < 30 {
        return Err(Error::evaluation(format!(
            "smoothness diagnostic kept {} probes; need at least 30",
            magnitudes.len()
        )));
    }
    let mean_magnitude = mean(&magnitudes);
    if mean_magnitude < 1e-9 {
        return Ok(SmoothnessReport {
            cv: f64::NAN,
            flat: true,
            mean_magnitude,
            surviving_probes: magnitudes.len(),
        });
    }
    Ok(SmoothnessReport {
        cv: sample_std(&magnitudes) / mean_magnitude,
        flat: false,
        mean_magnitude,
        surviving_probes: magnitudes.len(),
    })
}
