//! Per-iteration run records and their CSV form.
//!
//! One record per consumed budget unit. Generator-call accounting is exact:
//! the `generator_calls` column counts the generate/recombine calls that
//! iteration made (targeted mutation charges its probe calls plus the
//! offspring generation).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Crossover,
    Targeted,
    /// Targeted mutation whose deltas were all zero; the embedding update
    /// fell back to an exploratory perturbation after the probe spend.
    TargetedFallback,
    Exploratory,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Crossover => "crossover",
            OperatorKind::Targeted => "targeted",
            OperatorKind::TargetedFallback => "targeted-fallback",
            OperatorKind::Exploratory => "exploratory",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "crossover" => Ok(OperatorKind::Crossover),
            "targeted" => Ok(OperatorKind::Targeted),
            "targeted-fallback" => Ok(OperatorKind::TargetedFallback),
            "exploratory" => Ok(OperatorKind::Exploratory),
            other => Err(Error::config(format!("unknown operator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    Expanded,
    NewCell,
    Replaced,
    Rejected,
    /// Evaluation failed; the iteration was consumed with no insert.
    Failed,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Expanded => "expanded",
            OutcomeKind::NewCell => "new-cell",
            OutcomeKind::Replaced => "replaced",
            OutcomeKind::Rejected => "rejected",
            OutcomeKind::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "expanded" => Ok(OutcomeKind::Expanded),
            "new-cell" => Ok(OutcomeKind::NewCell),
            "replaced" => Ok(OutcomeKind::Replaced),
            "rejected" => Ok(OutcomeKind::Rejected),
            "failed" => Ok(OutcomeKind::Failed),
            other => Err(Error::config(format!("unknown outcome {other:?}"))),
        }
    }
}

impl From<crate::archive::InsertOutcome> for OutcomeKind {
    fn from(outcome: crate::archive::InsertOutcome) -> Self {
        use crate::archive::InsertOutcome::*;
        match outcome {
            Expanded { .. } => OutcomeKind::Expanded,
            NewCell { .. } => OutcomeKind::NewCell,
            Replaced { .. } => OutcomeKind::Replaced,
            Rejected { .. } => OutcomeKind::Rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: u64,
    pub operator: OperatorKind,
    pub outcome: OutcomeKind,
    pub qd_score: f64,
    pub coverage: f64,
    pub occupied: usize,
    pub sigma_p: f64,
    pub generator_calls: u64,
}

pub const CSV_HEADER: &str =
    "iteration,operator,outcome,qd_score,coverage,occupied,sigma_p,generator_calls";

/// Render records as CSV. Floats use the shortest round-trip form, so equal
/// runs produce byte-identical logs.
pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 64 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:?},{:?},{},{:?},{}\n",
            r.iteration,
            r.operator.as_str(),
            r.outcome.as_str(),
            r.qd_score,
            r.coverage,
            r.occupied,
            r.sigma_p,
            r.generator_calls
        ));
    }
    out
}

pub fn parse_csv(raw: &str) -> Result<Vec<RunRecord>> {
    let mut lines = raw.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(Error::config(format!(
                "run log header mismatch: got {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::config(format!(
                "run log line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::config(format!("run log line {}: bad number {s:?}", lineno + 2)))
        };
        records.push(RunRecord {
            iteration: fields[0]
                .parse()
                .map_err(|_| Error::config(format!("bad iteration {:?}", fields[0])))?,
            operator: OperatorKind::parse(fields[1])?,
            outcome: OutcomeKind::parse(fields[2])?,
            qd_score: parse_f64(fields[3])?,
            coverage: parse_f64(fields[4])?,
            occupied: fields[5]
                .parse()
                .map_err(|_| Error::config(format!("bad occupied {:?}", fields[5])))?,
            sigma_p: parse_f64(fields[6])?,
            generator_calls: fields[7]
                .parse()
                .map_err(|_| Error::config(format!("bad call count {:?}", fields[7])))?,
        });
    }
    Ok(records)
}
