//! Diversity metrics and run-comparison statistics for multi-seed batches.

use crate::error::{Error, Result};
use crate::math::quantile_type7_sorted;
use crate::rng::named_stream;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Mean BLEU of each text against all the others. Lower means more lexical
/// diversity. Uniform n-gram weights up to `max_n`, standard clipped counts,
/// brevity penalty, no smoothing (any zero precision zeroes that text's
/// score).
pub fn self_bleu(texts: &[String], max_n: usize) -> Result<f64> {
    if texts.len() < 2 {
        return Err(Error::Estimation(format!(
            "self-BLEU needs at least 2 texts, got {}",
            texts.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::Estimation("max_n must be >= 1".into()));
    }
    let tokenized: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
    let mut total = 0.0;
    for i in 0..tokenized.len() {
        let references: Vec<&Vec<String>> = tokenized
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, t)| t)
            .collect();
        total += bleu(&tokenized[i], &references, max_n);
    }
    Ok(total / texts.len() as f64)
}

/// Whitespace-plus-punctuation tokenization, lowercased: tokens are maximal
/// alphanumeric runs; everything else separates.
fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn bleu(candidate: &[String], references: &[&Vec<String>], max_n: usize) -> f64 {
    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(candidate, n);
        let total: u64 = cand_counts.values().sum();
        if total == 0 {
            return 0.0;
        }
        let mut clipped = 0u64;
        for (gram, count) in &cand_counts {
            let max_ref = references
                .iter()
                .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += (*count).min(max_ref);
        }
        if clipped == 0 {
            return 0.0;
        }
        log_precision_sum += (clipped as f64 / total as f64).ln();
    }

    // Reference length closest to the candidate's; ties pick the shorter.
    let c = candidate.len() as f64;
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by(|a, b| {
            let da = (*a as f64 - c).abs();
            let db = (*b as f64 - c).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(b))
        })
        .unwrap_or(0) as f64;
    let brevity = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    brevity * (log_precision_sum / max_n as f64).exp()
}

/// Vargha-Delaney effect size: probability a draw from `a` beats one from
/// `b`, ties counted half.
pub fn vargha_delaney(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Estimation("effect size needs non-empty samples".into()));
    }
    let mut wins = 0u64;
    let mut ties = 0u64;
    for x in a {
        for y in b {
            if x > y {
                wins += 1;
            } else if x == y {
                ties += 1;
            }
        }
    }
    Ok((wins as f64 + 0.5 * ties as f64) / (a.len() as f64 * b.len() as f64))
}

/// Percentile bootstrap CI (type-7 percentiles of the bootstrap statistics).
pub fn bootstrap_ci(
    sample: &[f64],
    statistic: &dyn Fn(&[f64]) -> f64,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if sample.len() < 2 {
        return Err(Error::Estimation(format!(
            "bootstrap needs at least 2 values, got {}",
            sample.len()
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Estimation(format!("level must be in (0,1), got {level}")));
    }
    if n_boot == 0 {
        return Err(Error::Estimation("n_boot must be >= 1".into()));
    }
    let mut rng = named_stream(seed, "bootstrap");
    let mut stats = Vec::with_capacity(n_boot);
    let mut resample = vec![0.0; sample.len()];
    for _ in 0..n_boot {
        for slot in &mut resample {
            *slot = sample[rng.random_range(0..sample.len())];
        }
        stats.push(statistic(&resample));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite bootstrap statistics"));
    let tail = (1.0 - level) / 2.0;
    Ok((
        quantile_type7_sorted(&stats, tail),
        quantile_type7_sorted(&stats, 1.0 - tail),
    ))
}

pub fn median(xs: &[f64]) -> f64 {
    crate::math::median(xs)
}

/// (25th, 75th) percentiles, type-7 interpolation.
pub fn iqr_bounds(xs: &[f64]) -> (f64, f64) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    (
        quantile_type7_sorted(&sorted, 0.25),
        quantile_type7_sorted(&sorted, 0.75),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRow {
    pub iteration: u64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Per-iteration median and IQR of coverage across runs. Every run must be
/// logged on the same iteration grid.
pub fn coverage_dynamics(runs: &[Vec<(u64, f64)>]) -> Result<Vec<DynamicsRow>> {
    if runs.is_empty() {
        return Err(Error::Estimation("dynamics need at least one run".into()));
    }
    let grid: Vec<u64> = runs[0].iter().map(|(i, _)| *i).collect();
    for (idx, run) in runs.iter().enumerate() {
        let this: Vec<u64> = run.iter().map(|(i, _)| *i).collect();
        if this != grid {
            return Err(Error::Estimation(format!(
                "run {idx} has a misaligned iteration grid"
            )));
        }
    }
    Ok(grid
        .iter()
        .enumerate()
        .map(|(row, &iteration)| {
            let values: Vec<f64> = runs.iter().map(|run| run[row].1).collect();
            let (q1, q3) = iqr_bounds(&values);
            DynamicsRow {
                iteration,
                median: median(&values),
                q1,
                q3,
            }
        })
        .collect())
}

pub fn dynamics_to_csv(rows: &[DynamicsRow]) -> String {
    let mut out = String::from("iteration,median,q1,q3\n");
    for r in rows {
        out.push_str(&format!("{},{:?},{:?},{:?}\n", r.iteration, r.median, r.q1, r.q3));
    }
    out
}

/// Two-method comparison over one metric's per-seed samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub a_samples: Vec<f64>,
    pub b_samples: Vec<f64>,
    pub a_median: f64,
    pub b_median: f64,
    pub a_iqr: (f64, f64),
    pub b_iqr: (f64, f64),
    /// Probability a run of method A beats a run of method B.
    pub vargha_delaney_a: f64,
    /// 95% percentile bootstrap CI of each method's median.
    pub a_median_ci: (f64, f64),
    pub b_median_ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub method_a: String,
    pub method_b: String,
    pub n_bootstrap: usize,
    pub level: f64,
    pub seed: u64,
    pub metrics: Vec<MetricComparison>,
}

pub fn compare_methods(
    method_a: impl Into<String>,
    method_b: impl Into<String>,
    metrics: &[(String, Vec<f64>, Vec<f64>)],
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<ComparisonReport> {
    let mut result = Vec::with_capacity(metrics.len());
    for (name, a, b) in metrics {
        result.push(MetricComparison {
            metric: name.clone(),
            a_samples: a.clone(),
            b_samples: b.clone(),
            a_median: median(a),
            b_median: median(b),
            a_iqr: iqr_bounds(a),
            b_iqr: iqr_bounds(b),
            vargha_delaney_a: vargha_delaney(a, b)?,
            a_median_ci: bootstrap_ci(a, &median, n_boot, level, seed)?,
            b_median_ci: bootstrap_ci(b, &median, n_boot, level, seed)?,
        });
    }
    Ok(ComparisonReport {
        method_a: method_a.into(),
        method_b: method_b.into(),
        n_bootstrap: n_boot,
        level,
        seed,
        metrics: result,
    })
}
