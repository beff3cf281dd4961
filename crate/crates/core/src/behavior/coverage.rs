//! Occupied-cell comparison between semantic-only, explicit-only, and hybrid
//! descriptors: the empirical surrogate for the hybrid coverage bound.
//!
//! Three CVT templates with equal cell counts tessellate the semantic space,
//! the explicit space, and the weighted product space. The same sample set is
//! binned into each, and the occupied-cell counts are compared.

use crate::behavior::fuse;
use crate::behavior::semantic::SemanticPipeline;
use crate::error::{Error, Result};
use crate::kmeans::kmeans;
use crate::math::nearest_point;
use crate::rng::named_stream;
use rand::Rng;

const MIN_SAMPLES: usize = 100;

/// Fixed tessellations of the three descriptor spaces, built once from
/// uniform reference clouds so each space is partitioned evenly.
#[derive(Debug, Clone)]
pub struct CoverageTemplates {
    pub d_s: usize,
    pub d_e: usize,
    pub alpha: f64,
    sem_centroids: Vec<Vec<f64>>,
    exp_centroids: Vec<Vec<f64>>,
    hyb_centroids: Vec<Vec<f64>>,
}

impl CoverageTemplates {
    pub fn uniform(d_s: usize, d_e: usize, alpha: f64, cells: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config(format!("alpha must be in [0,1], got {alpha}")));
        }
        if cells == 0 {
            return Err(Error::config("coverage templates need at least one cell"));
        }
        let reference_size = (cells * 20).max(200);
        let mut rng = named_stream(seed, "coverage-template");
        let cloud = |dim: usize, rng: &mut rand_chacha::ChaCha12Rng| -> Vec<Vec<f64>> {
            (0..reference_size)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect()
        };
        let sem_cloud = cloud(d_s, &mut rng);
        let exp_cloud = cloud(d_e, &mut rng);
        // The hybrid cloud carries the same sqrt weighting the fused
        // descriptor does, so its cells live in the same metric.
        let ws = alpha.sqrt();
        let we = (1.0 - alpha).sqrt();
        let hyb_cloud: Vec<Vec<f64>> = sem_cloud
            .iter()
            .zip(&exp_cloud)
            .map(|(s, e)| {
                let mut v: Vec<f64> = s.iter().map(|x| ws * x).collect();
                v.extend(e.iter().map(|x| we * x));
                v
            })
            .collect();
        Ok(CoverageTemplates {
            d_s,
            d_e,
            alpha,
            sem_centroids: kmeans(&sem_cloud, cells, &mut rng)?,
            exp_centroids: kmeans(&exp_cloud, cells, &mut rng)?,
            hyb_centroids: kmeans(&hyb_cloud, cells, &mut rng)?,
        })
    }

    /// Fit the three templates to reference descriptor pairs, the same way
    /// archive centroids come from a reference corpus. The hybrid template is
    /// fitted to the fused pairs.
    pub fn from_reference(
        sem_refs: &[Vec<f64>],
        exp_refs: &[Vec<f64>],
        alpha: f64,
        cells: usize,
        seed: u64,
    ) -> Result<Self> {
        if sem_refs.len() != exp_refs.len() {
            return Err(Error::Dimension {
                context: "coverage reference pairs",
                expected: sem_refs.len(),
                actual: exp_refs.len(),
            });
        }
        if sem_refs.len() < cells {
            return Err(Error::config(format!(
                "need at least {cells} reference pairs, got {}",
                sem_refs.len()
            )));
        }
        let d_s = sem_refs.first().map(|v| v.len()).unwrap_or(0);
        let d_e = exp_refs.first().map(|v| v.len()).unwrap_or(0);
        let hyb_refs: Vec<Vec<f64>> = sem_refs
            .iter()
            .zip(exp_refs)
            .map(|(s, e)| Ok(fuse(s.clone(), e.clone(), alpha)?.fused))
            .collect::<Result<_>>()?;
        let mut rng = named_stream(seed, "coverage-template");
        Ok(CoverageTemplates {
            d_s,
            d_e,
            alpha,
            sem_centroids: kmeans(sem_refs, cells, &mut rng)?,
            exp_centroids: kmeans(exp_refs, cells, &mut rng)?,
            hyb_centroids: kmeans(&hyb_refs, cells, &mut rng)?,
        })
    }

    pub fn cells(&self) -> usize {
        self.sem_centroids.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageGain {
    pub cells_sem: usize,
    pub cells_exp: usize,
    pub cells_hyb: usize,
}

/// Bin every sample three ways and count occupied cells per binning.
/// `explicit_features` must return normalized vectors of length `d_e`.
pub fn hybrid_coverage_gain(
    samples: &[String],
    pipeline: &SemanticPipeline,
    explicit_features: &dyn Fn(&str) -> Result<Vec<f64>>,
    alpha: f64,
    templates: &CoverageTemplates,
) -> Result<CoverageGain> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::config(format!(
            "coverage comparison needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if pipeline.output_dim() != templates.d_s {
        return Err(Error::Dimension {
            context: "coverage semantic dim",
            expected: templates.d_s,
            actual: pipeline.output_dim(),
        });
    }

    let mut sem_hit = vec![false; templates.cells()];
    let mut exp_hit = vec![false; templates.cells()];
    let mut hyb_hit = vec![false; templates.cells()];

    for text in samples {
        let sem = pipeline.descriptor(text)?;
        let exp = explicit_features(text)?;
        if exp.len() != templates.d_e {
            return Err(Error::Dimension {
                context: "coverage explicit dim",
                expected: templates.d_e,
                actual: exp.len(),
            });
        }
        let hyb = fuse(sem.clone(), exp.clone(), alpha)?.fused;
        sem_hit[nearest_point(&templates.sem_centroids, &sem).0] = true;
        exp_hit[nearest_point(&templates.exp_centroids, &exp).0] = true;
        hyb_hit[nearest_point(&templates.hyb_centroids, &hyb).0] = true;
    }

    let count = |hits: &[bool]| hits.iter().filter(|h| **h).count();
    Ok(CoverageGain {
        cells_sem: count(&sem_hit),
        cells_exp: count(&exp_hit),
        cells_hyb: count(&hyb_hit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted_pipeline() -> SemanticPipeline {
        let texts: Vec<String> = (0..40)
            .map(|i| format!("reference sample {i} {}", "pad ".repeat(i % 7)))
            .collect();
        SemanticPipeline::fit_hash_ngram(&texts, 2, 0, "coverage-test").unwrap()
    }

    #[test]
    fn identical_samples_occupy_one_cell_each_way() {
        let pipeline = fitted_pipeline();
        let templates = CoverageTemplates::uniform(2, 2, 0.6, 16, 1).unwrap();
        let samples = vec!["the same text every time".to_string(); 120];
        let explicit = |_: &str| Ok(vec![0.4, 0.7]);
        let gain = hybrid_coverage_gain(&samples, &pipeline, &explicit, 0.6, &templates).unwrap();
        assert_eq!(gain.cells_sem, 1);
        assert_eq!(gain.cells_exp, 1);
        assert_eq!(gain.cells_hyb, 1);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let pipeline = fitted_pipeline();
        let templates = CoverageTemplates::uniform(2, 2, 0.6, 16, 1).unwrap();
        let samples = vec!["text".to_string(); 10];
        let explicit = |_: &str| Ok(vec![0.0, 0.0]);
        assert!(hybrid_coverage_gain(&samples, &pipeline, &explicit, 0.6, &templates).is_err());
    }

    #[test]
    fn templates_have_equal_cell_counts() {
        let t = CoverageTemplates::uniform(2, 3, 0.5, 24, 9).unwrap();
        assert_eq!(t.sem_centroids.len(), 24);
        assert_eq!(t.exp_centroids.len(), 24);
        assert_eq!(t.hyb_centroids.len(), 24);
        assert_eq!(t.hyb_centroids[0].len(), 5);
    }
}
