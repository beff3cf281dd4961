//! KSG mutual-information estimation between descriptor components.
//!
//! Uses estimator #1 of Kraskov-Stogbauer-Grassberger: k-nearest neighbors
//! under the max norm in the joint space with digamma corrections. Marginal
//! entropies come from the Kozachenko-Leonenko estimator, and the normalized
//! score is `nmi = I / min(H_sem, H_exp)`.
//!
//! Coordinates are standardized (zero mean, unit variance) before distance
//! computations. MI is invariant under per-coordinate affine maps, so the
//! estimate is unchanged, while the marginal entropies — and therefore the
//! normalization — become scale-independent.

use crate::error::{Error, Result};
use crate::math::{all_finite, chebyshev};
use serde::{Deserialize, Serialize};

/// Above this, the dependence is treated as degenerate (continuous MI grows
/// without bound when one side is a function of the other).
const NMI_DEGENERATE_THRESHOLD: f64 = 1.5;
const DUPLICATE_WARNING_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    /// KSG mutual information in nats, clamped at zero.
    pub mi_nats: f64,
    pub h_sem: f64,
    pub h_exp: f64,
    /// `mi_nats / min(h_sem, h_exp)`; NaN when undefined.
    pub nmi: f64,
    /// False when `min(h_sem, h_exp) <= 0`, which leaves nmi undefined.
    pub nmi_defined: bool,
    /// Set when the estimate indicates degenerate (near-deterministic)
    /// dependence or an undefined normalization.
    pub degenerate: bool,
    /// More than 10% of joint sample points are exact duplicates; the
    /// estimator is biased on such data.
    pub duplicate_warning: bool,
    pub k_neighbors: usize,
    pub sample_count: usize,
}

pub fn estimate_nmi(
    samples_sem: &[Vec<f64>],
    samples_exp: &[Vec<f64>],
    k: usize,
) -> Result<MIEstimate> {
    let n = samples_sem.len();
    if samples_exp.len() != n {
        return Err(Error::Estimation(format!(
            "sample counts differ: {n} vs {}",
            samples_exp.len()
        )));
    }
    if n < 50 {
        return Err(Error::Estimation(format!(
            "need at least 50 paired samples, got {n}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::Estimation(format!(
            "k must satisfy 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let d_sem = samples_sem[0].len();
    let d_exp = samples_exp[0].len();
    if d_sem == 0 || d_exp == 0 {
        return Err(Error::Estimation("samples must have at least one dimension".into()));
    }
    for (side, dim, data) in [("semantic", d_sem, samples_sem), ("explicit", d_exp, samples_exp)] {
        for (i, v) in data.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Estimation(format!(
                    "{side} sample {i} has dim {}, expected {dim}",
                    v.len()
                )));
            }
            if !all_finite(v) {
                return Err(Error::Estimation(format!("{side} sample {i} is not finite")));
            }
        }
    }

    let xs = standardize(samples_sem, d_sem);
    let ys = standardize(samples_exp, d_exp);

    // Per-point marginal distances, reused for the joint norm, the strict
    // counts, and the KL entropies.
    let mut psi_counts_sum = 0.0;
    let mut duplicates = 0usize;
    let mut kth_x = vec![0.0f64; n];
    let mut kth_y = vec![0.0f64; n];

    let mut dx = vec![0.0f64; n];
    let mut dy = vec![0.0f64; n];
    let mut joint = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            dx[j] = chebyshev(&xs[i], &xs[j]);
            dy[j] = chebyshev(&ys[i], &ys[j]);
            joint[j] = dx[j].max(dy[j]);
        }
        joint[i] = f64::INFINITY; // exclude self
        let eps = kth_smallest(&joint, k);
        if eps == 0.0 {
            duplicates += 1;
        }

        let mut nx = 0usize;
        let mut ny = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            if dx[j] < eps {
                nx += 1;
            }
            if dy[j] < eps {
                ny += 1;
            }
        }
        psi_counts_sum += digamma((nx + 1) as f64) + digamma((ny + 1) as f64);

        dx[i] = f64::INFINITY;
        dy[i] = f64::INFINITY;
        kth_x[i] = kth_smallest(&dx, k);
        kth_y[i] = kth_smallest(&dy, k);
    }

    let nf = n as f64;
    let mi_raw = digamma(k as f64) + digamma(nf) - psi_counts_sum / nf;
    let mi_nats = mi_raw.max(0.0);

    let h_sem = kl_entropy(&kth_x, d_sem, n, k);
    let h_exp = kl_entropy(&kth_y, d_exp, n, k);

    let denom = h_sem.min(h_exp);
    let nmi_defined = denom > 0.0;
    let nmi = if nmi_defined { mi_nats / denom } else { f64::NAN };
    let duplicate_warning = (duplicates as f64) > DUPLICATE_WARNING_FRACTION * nf;
    let degenerate =
        !nmi_defined || nmi > NMI_DEGENERATE_THRESHOLD || duplicate_warning;

    Ok(MIEstimate {
        mi_nats,
        h_sem,
        h_exp,
        nmi,
        nmi_defined,
        degenerate,
        duplicate_warning,
        k_neighbors: k,
        sample_count: n,
    })
}

fn standardize(samples: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in samples {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; dim];
    for v in samples {
        for (s, (x, m)) in std.iter_mut().zip(v.iter().zip(&mean)) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s <= 0.0 {
            *s = 1.0; // constant coordinate contributes nothing either way
        }
    }
    samples
        .iter()
        .map(|v| {
            v.iter()
                .zip(mean.iter().zip(&std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect()
        })
        .collect()
}

/// Kozachenko-Leonenko differential entropy under the max norm:
/// `H = psi(n) - psi(k) + (d/n) * sum(log(2 r_i))`, skipping zero radii
/// (exact duplicates), which carry no volume information.
fn kl_entropy(kth_dist: &[f64], dim: usize, n: usize, k: usize) -> f64 {
    let positive: Vec<f64> = kth_dist.iter().copied().filter(|r| *r > 0.0).collect();
    if positive.is_empty() {
        return f64::NEG_INFINITY;
    }
    let log_sum: f64 = positive.iter().map(|r| (2.0 * r).ln()).sum();
    digamma(n as f64) - digamma(k as f64) + dim as f64 * log_sum / positive.len() as f64
}

/// k-th smallest value (1-based k). The input may contain infinities.
fn kth_smallest(values: &[f64], k: usize) -> f64 {
    let mut copy = values.to_vec();
    let (_, kth, _) = copy.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
    *kth
}

/// Digamma via upward recurrence and the asymptotic series.
pub(crate) fn digamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut result = 0.0;
    while x < 6.0 {
        result -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    result += x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::named_stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn correlated_gaussians(n: usize, rho: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = named_stream(seed, "mi-test");
        let scale = (1.0 - rho * rho).sqrt();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            xs.push(vec![z1]);
            ys.push(vec![rho * z1 + scale * z2]);
        }
        (xs, ys)
    }

    #[test]
    fn digamma_matches_known_values() {
        // psi(1) = -gamma, psi(2) = 1 - gamma, psi(0.5) = -gamma - 2 ln 2.
        let gamma = 0.5772156649015329;
        assert!((digamma(1.0) + gamma).abs() < 1e-10);
        assert!((digamma(2.0) - (1.0 - gamma)).abs() < 1e-10);
        assert!((digamma(0.5) + gamma + 2.0 * std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn independent_uniforms_have_near_zero_nmi() {
        let mut rng = named_stream(11, "mi-test");
        let xs: Vec<Vec<f64>> = (0..5000).map(|_| vec![rng.random::<f64>()]).collect();
        let ys: Vec<Vec<f64>> = (0..5000).map(|_| vec![rng.random::<f64>()]).collect();
        let est = estimate_nmi(&xs, &ys, 3).unwrap();
        assert!(est.nmi_defined);
        assert!(est.nmi.abs() < 0.05, "nmi = {}", est.nmi);
        assert!(!est.degenerate);
    }

    #[test]
    fn correlated_gaussian_matches_closed_form() {
        let rho: f64 = 0.6;
        let expected = -0.5 * (1.0 - rho * rho).ln();
        let (xs, ys) = correlated_gaussians(5000, rho, 21);
        let est = estimate_nmi(&xs, &ys, 3).unwrap();
        assert!(
            (est.mi_nats - expected).abs() < 0.05,
            "I = {}, expected {expected}",
            est.mi_nats
        );
    }

    #[test]
    fn identical_samples_are_flagged_degenerate() {
        let mut rng = named_stream(31, "mi-test");
        let xs: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.random::<f64>()]).collect();
        let est = estimate_nmi(&xs, &xs, 3).unwrap();
        assert!(est.degenerate, "{est:?}");
    }

    #[test]
    fn too_few_samples_or_bad_k_error() {
        let xs = vec![vec![0.0]; 10];
        assert!(estimate_nmi(&xs, &xs, 3).is_err());
        let xs = vec![vec![0.0]; 60];
        assert!(estimate_nmi(&xs, &xs, 60).is_err());
        assert!(estimate_nmi(&xs, &xs, 0).is_err());
    }

    #[test]
    fn duplicate_heavy_samples_set_the_warning_flag() {
        let mut rng = named_stream(41, "mi-test");
        let mut xs: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random::<f64>()]).collect();
        let mut ys: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random::<f64>()]).collect();
        for i in 0..30 {
            xs[i] = vec![0.25];
            ys[i] = vec![0.75];
        }
        let est = estimate_nmi(&xs, &ys, 3).unwrap();
        assert!(est.duplicate_warning);
    }

    #[test]
    fn invariant_under_monotone_transforms_within_noise() {
        let (xs, ys) = correlated_gaussians(2000, 0.5, 17);
        let base = estimate_nmi(&xs, &ys, 3).unwrap();
        let xs_t: Vec<Vec<f64>> = xs.iter().map(|v| vec![v[0].exp()]).collect();
        let ys_t: Vec<Vec<f64>> = ys.iter().map(|v| vec![v[0].powi(3)]).collect();
        let transformed = estimate_nmi(&xs_t, &ys_t, 3).unwrap();
        assert!(
            (base.mi_nats - transformed.mi_nats).abs() < 0.05,
            "{} vs {}",
            base.mi_nats,
            transformed.mi_nats
        );
    }
}
