//! CVT archive with adaptive centroid expansion, buffered median-fitness
//! replacement, and elite re-evaluation.
//!
//! The archive is single-writer: every mutation goes through `&mut self` on
//! one owner. Parallel evaluation, when used, funnels results back through
//! that owner in submission order.

use crate::behavior::BehaviorDescriptor;
use crate::error::{Error, Result};
use crate::genome::PromptEmbedding;
use crate::kmeans::kmeans;
use crate::math::{all_finite, l2_distance, median, nearest_point};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Fraction used for the expansion threshold: tau is the nearest-rank 90th
/// percentile of pairwise centroid distances.
const TAU_PERCENTILE: f64 = 0.9;

/// One stored solution: the text, the genome that produced it, and the
/// descriptor it was binned under. `explicit_raw` keeps un-normalized code
/// features so reports can renormalize under later maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub embedding: PromptEmbedding,
    pub descriptor: BehaviorDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_raw: Option<Vec<f64>>,
    pub eval_count: u64,
}

/// An occupied cell: the elite plus its ring buffer of fitness samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteSlot {
    pub candidate: Candidate,
    fitness_buffer: VecDeque<f64>,
    median_fitness: f64,
}

impl EliteSlot {
    fn new(candidate: Candidate, fitness: f64) -> Self {
        EliteSlot {
            candidate,
            fitness_buffer: VecDeque::from([fitness]),
            median_fitness: fitness,
        }
    }

    fn push_fitness(&mut self, fitness: f64, capacity: usize) {
        while self.fitness_buffer.len() >= capacity {
            self.fitness_buffer.pop_front();
        }
        self.fitness_buffer.push_back(fitness);
        let values: Vec<f64> = self.fitness_buffer.iter().copied().collect();
        self.median_fitness = median(&values);
    }

    pub fn median_fitness(&self) -> f64 {
        self.median_fitness
    }

    pub fn fitness_buffer(&self) -> impl Iterator<Item = f64> + '_ {
        self.fitness_buffer.iter().copied()
    }

    pub(crate) fn restore(candidate: Candidate, buffer: Vec<f64>) -> Result<Self> {
        if buffer.is_empty() {
            return Err(Error::Snapshot("elite slot needs a non-empty buffer".into()));
        }
        let median_fitness = median(&buffer);
        Ok(EliteSlot {
            candidate,
            fitness_buffer: buffer.into(),
            median_fitness,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InsertOutcome {
    /// Descriptor fell outside tau of all centroids and a centroid was added.
    Expanded { cell: usize },
    /// Previously empty cell now holds the candidate.
    NewCell { cell: usize },
    /// Candidate's fitness strictly beat the incumbent's buffered median.
    Replaced { cell: usize },
    /// Incumbent kept (ties reject).
    Rejected { cell: usize },
}

impl InsertOutcome {
    pub fn improved_archive(&self) -> bool {
        !matches!(self, InsertOutcome::Rejected { .. })
    }

    pub fn cell(&self) -> usize {
        match *self {
            InsertOutcome::Expanded { cell }
            | InsertOutcome::NewCell { cell }
            | InsertOutcome::Replaced { cell }
            | InsertOutcome::Rejected { cell } => cell,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InsertOutcome::Expanded { .. } => "expanded",
            InsertOutcome::NewCell { .. } => "new-cell",
            InsertOutcome::Replaced { .. } => "replaced",
            InsertOutcome::Rejected { .. } => "rejected",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Archive {
    centroids: Vec<Vec<f64>>,
    cells: Vec<Option<EliteSlot>>,
    tau: f64,
    c_max: usize,
    buffer_capacity: usize,
}

/// Outcome of one re-evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReevalReport {
    /// (cell index, updated median) for every touched cell.
    pub updated: Vec<(usize, f64)>,
    /// Cells whose evaluator call failed; they keep their previous buffer.
    pub skipped: Vec<usize>,
    pub evaluator_calls: u64,
}

impl Archive {
    /// Build centroids by k-means over reference descriptors.
    pub fn from_reference(
        reference: &[Vec<f64>],
        cells: usize,
        c_max: usize,
        buffer_capacity: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if cells == 0 {
            return Err(Error::config("archive needs at least one cell"));
        }
        if c_max < cells {
            return Err(Error::config(format!(
                "c_max ({c_max}) must be >= initial cell count ({cells})"
            )));
        }
        if buffer_capacity == 0 {
            return Err(Error::config("fitness buffer capacity must be >= 1"));
        }
        if reference.len() < cells {
            return Err(Error::config(format!(
                "need at least {cells} reference descriptors, got {}",
                reference.len()
            )));
        }
        let centroids = kmeans(reference, cells, rng)?;
        let tau = compute_tau(&centroids);
        Ok(Archive {
            cells: vec![None; centroids.len()],
            centroids,
            tau,
            c_max,
            buffer_capacity,
        })
    }

    pub(crate) fn from_parts(
        centroids: Vec<Vec<f64>>,
        cells: Vec<Option<EliteSlot>>,
        c_max: usize,
        buffer_capacity: usize,
    ) -> Result<Self> {
        if centroids.is_empty() || centroids.len() != cells.len() {
            return Err(Error::Snapshot("inconsistent archive parts".into()));
        }
        let tau = compute_tau(&centroids);
        Ok(Archive {
            centroids,
            cells,
            tau,
            c_max,
            buffer_capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied() == 0
    }

    pub fn c_max(&self) -> usize {
        self.c_max
    }

    pub fn buffer_capacity(&self) -> usize {
        self.buffer_capacity
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn centroid(&self, cell: usize) -> &[f64] {
        &self.centroids[cell]
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn cell(&self, cell: usize) -> Option<&EliteSlot> {
        self.cells.get(cell).and_then(|c| c.as_ref())
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn occupied_indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|_| i))
            .collect()
    }

    pub fn empty_indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| if c.is_none() { Some(i) } else { None })
            .collect()
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = (usize, &EliteSlot)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|slot| (i, slot)))
    }

    /// Nearest centroid by Euclidean distance; ties go to the lowest index.
    pub fn nearest_centroid(&self, descriptor: &[f64]) -> Result<(usize, f64)> {
        if descriptor.len() != self.centroids[0].len() {
            return Err(Error::Dimension {
                context: "archive descriptor",
                expected: self.centroids[0].len(),
                actual: descriptor.len(),
            });
        }
        Ok(nearest_point(&self.centroids, descriptor))
    }

    /// Nearest *empty* cell to a descriptor, if any cell is empty.
    pub fn nearest_empty_centroid(&self, descriptor: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.is_some() {
                continue;
            }
            let d = l2_distance(&self.centroids[i], descriptor);
            if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Expansion check, then empty-cell insert, then strict buffered-median
    /// comparison. The challenger's median on first contact is its single
    /// evaluation; incumbents keep whatever buffer they have accrued.
    pub fn try_insert(&mut self, candidate: Candidate, fitness: f64) -> Result<InsertOutcome> {
        if !all_finite(&candidate.descriptor.fused) {
            return Err(Error::evaluation("candidate descriptor is not finite"));
        }
        if !fitness.is_finite() {
            return Err(Error::evaluation("candidate fitness is not finite"));
        }
        let (cell, distance) = self.nearest_centroid(&candidate.descriptor.fused)?;

        if distance > self.tau && self.centroids.len() < self.c_max {
            let new_cell = self.centroids.len();
            self.centroids.push(candidate.descriptor.fused.clone());
            self.cells.push(Some(EliteSlot::new(candidate, fitness)));
            self.tau = compute_tau(&self.centroids);
            return Ok(InsertOutcome::Expanded { cell: new_cell });
        }

        match &mut self.cells[cell] {
            slot @ None => {
                *slot = Some(EliteSlot::new(candidate, fitness));
                Ok(InsertOutcome::NewCell { cell })
            }
            Some(incumbent) => {
                if fitness > incumbent.median_fitness {
                    *incumbent = EliteSlot::new(candidate, fitness);
                    Ok(InsertOutcome::Replaced { cell })
                } else {
                    Ok(InsertOutcome::Rejected { cell })
                }
            }
        }
    }

    /// Push one fresh fitness sample into ceil(fraction * occupied) cells,
    /// sampled uniformly without replacement. Elites are never evicted here,
    /// only re-scored. Evaluator failures skip that cell.
    pub fn reevaluate_elites(
        &mut self,
        fraction: f64,
        evaluator: &mut dyn FnMut(&Candidate) -> Result<f64>,
        rng: &mut impl Rng,
    ) -> Result<ReevalReport> {
        if !(0.0..=1.0).contains(&fraction) || fraction <= 0.0 {
            return Err(Error::config(format!(
                "re-evaluation fraction must be in (0,1], got {fraction}"
            )));
        }
        let mut occupied = self.occupied_indices();
        if occupied.is_empty() {
            return Err(Error::config("cannot re-evaluate an empty archive"));
        }
        let count = ceil_fraction(fraction, occupied.len());

        // Partial Fisher-Yates: the first `count` entries become the sample.
        for i in 0..count {
            let j = rng.random_range(i..occupied.len());
            occupied.swap(i, j);
        }
        let mut chosen: Vec<usize> = occupied[..count].to_vec();
        chosen.sort_unstable();

        let mut report = ReevalReport {
            updated: Vec::with_capacity(count),
            skipped: Vec::new(),
            evaluator_calls: 0,
        };
        for cell in chosen {
            let slot = self.cells[cell].as_mut().expect("cell was occupied");
            report.evaluator_calls += 1;
            match evaluator(&slot.candidate) {
                Ok(fitness) => {
                    if !fitness.is_finite() {
                        report.skipped.push(cell);
                        continue;
                    }
                    slot.push_fitness(fitness, self.buffer_capacity);
                    slot.candidate.eval_count += 1;
                    report.updated.push((cell, slot.median_fitness));
                }
                Err(_) => report.skipped.push(cell),
            }
        }
        Ok(report)
    }

    /// Sum of buffered medians over occupied cells.
    pub fn qd_score(&self) -> f64 {
        self.iter_occupied().map(|(_, s)| s.median_fitness).sum()
    }

    /// Occupied fraction of the *current* centroid count, so expansion can
    /// transiently lower coverage.
    pub fn coverage(&self) -> f64 {
        self.occupied() as f64 / self.centroids.len() as f64
    }

    /// Verify every stored descriptor against a recomputation of its text.
    /// Returns the cells whose descriptors no longer match within `tol`.
    pub fn audit_descriptors(
        &self,
        recompute: &mut dyn FnMut(&str) -> Result<Vec<f64>>,
        tol: f64,
    ) -> Result<Vec<usize>> {
        let mut mismatched = Vec::new();
        for (i, slot) in self.iter_occupied() {
            let fresh = recompute(&slot.candidate.text)?;
            let stored = &slot.candidate.descriptor.fused;
            if fresh.len() != stored.len()
                || fresh
                    .iter()
                    .zip(stored)
                    .any(|(a, b)| (a - b).abs() > tol)
            {
                mismatched.push(i);
            }
        }
        Ok(mismatched)
    }
}

/// ceil(fraction * n) with float-dust snapping so e.g. 0.1 * 50 counts as 5.
fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    ((raw - 1e-9).ceil().max(1.0) as usize).min(n)
}

/// Nearest-rank 90th percentile of all pairwise centroid distances.
/// A single centroid has no pairs; tau is then +inf (no expansion pressure
/// until a second centroid exists).
fn compute_tau(centroids: &[Vec<f64>]) -> f64 {
    let c = centroids.len();
    if c < 2 {
        return f64::INFINITY;
    }
    let mut distances = Vec::with_capacity(c * (c - 1) / 2);
    for i in 0..c {
        for j in (i + 1)..c {
            distances.push(l2_distance(&centroids[i], &centroids[j]));
        }
    }
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((TAU_PERCENTILE * distances.len() as f64).ceil() as usize).clamp(1, distances.len());
    distances[rank - 1]
}
