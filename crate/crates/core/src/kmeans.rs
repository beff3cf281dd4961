//! Seeded k-means (k-means++ initialization, Lloyd iterations) for CVT
//! centroid construction.

use crate::error::{Error, Result};
use crate::math::{l2_distance, l2_distance_sq, nearest_point};
use rand::Rng;

pub(crate) const MAX_ITERS: usize = 100;
pub(crate) const TOLERANCE: f64 = 1e-6;

/// Run k-means over `points`. Deterministic given the RNG state. Errors when
/// there are fewer distinct points than clusters.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::config("k-means needs k >= 1"));
    }
    if points.len() < k {
        return Err(Error::config(format!(
            "k-means needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::config("k-means points have unequal dimensions"));
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(Error::config(format!(
            "k-means needs {k} distinct points, found {distinct}"
        )));
    }

    let mut centroids = plus_plus_seed(points, k, rng);
    let mut assignment = vec![0usize; points.len()];

    for _ in 0..MAX_ITERS {
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest_point(&centroids, p).0;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }

        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its centroid
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            movement = movement.max(l2_distance(&centroids[c], &new));
            centroids[c] = new;
        }
        if movement < TOLERANCE {
            break;
        }
    }
    Ok(centroids)
}

/// k-means++: first center uniform, then d^2-weighted draws.
fn plus_plus_seed(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())].clone());
    let mut dist_sq: Vec<f64> = points
        .iter()
        .map(|p| l2_distance_sq(p, &centers[0]))
        .collect();

    while centers.len() < k {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass sits on already-chosen points; take the
            // first point not yet selected (distinctness was checked).
            points
                .iter()
                .position(|p| centers.iter().all(|c| c != p))
                .expect("a distinct point exists")
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.push(points[next].clone());
        for (d, p) in dist_sq.iter_mut().zip(points) {
            *d = d.min(l2_distance_sq(p, centers.last().unwrap()));
        }
    }
    centers
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    sorted.len()
}
