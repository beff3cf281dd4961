//! Archive snapshot export and import.
//!
//! Layout: a JSONL file whose first line is an archive-level meta record and
//! every following line one occupied cell; prompt embeddings live in a JSON
//! sidecar keyed by `embedding_ref`. Floats serialize in shortest round-trip
//! form and parse exactly, so import restores bit-identical state.

use crate::archive::{Archive, Candidate, EliteSlot};
use crate::behavior::BehaviorDescriptor;
use crate::error::{Error, Result};
use crate::genome::PromptEmbedding;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const SNAPSHOT_VERSION: u32 = 1;

/// Descriptor-layout and normalization metadata carried with every export so
/// consumers can split fused vectors and renormalize raw code features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub version: u32,
    pub alpha: f64,
    pub d_s: usize,
    /// "codec", "code", or "writing".
    pub explicit_kind: String,
    pub max_complexity: f64,
    pub max_loc: f64,
    pub sidecar: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaLine {
    #[serde(rename = "type")]
    kind: String,
    version: u32,
    alpha: f64,
    d_s: usize,
    explicit_kind: String,
    max_complexity: f64,
    max_loc: f64,
    sidecar: String,
    centroids: Vec<Vec<f64>>,
    tau: f64,
    c_max: usize,
    buffer_capacity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellLine {
    #[serde(rename = "type")]
    kind: String,
    cell_index: usize,
    centroid: Vec<f64>,
    descriptor: BehaviorDescriptor,
    fitness_buffer: Vec<f64>,
    median: f64,
    text: String,
    embedding_ref: String,
    eval_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    explicit_raw: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    n_tokens: usize,
    dim: usize,
    embeddings: BTreeMap<String, Vec<f64>>,
}

fn embedding_ref(cell: usize) -> String {
    format!("emb-{cell:06}")
}

/// Render the snapshot to (jsonl, sidecar) strings. Cells appear in
/// ascending index order, so equal archives export byte-identically.
pub fn export_to_strings(archive: &Archive, meta: &SnapshotMeta) -> Result<(String, String)> {
    let meta_line = MetaLine {
        kind: "meta".into(),
        version: meta.version,
        alpha: meta.alpha,
        d_s: meta.d_s,
        explicit_kind: meta.explicit_kind.clone(),
        max_complexity: meta.max_complexity,
        max_loc: meta.max_loc,
        sidecar: meta.sidecar.clone(),
        centroids: archive.centroids().to_vec(),
        tau: archive.tau(),
        c_max: archive.c_max(),
        buffer_capacity: archive.buffer_capacity(),
    };
    let mut jsonl = serde_json::to_string(&meta_line)?;
    jsonl.push('\n');

    let mut embeddings = BTreeMap::new();
    let mut n_tokens = 0;
    let mut dim = 0;
    for (cell, slot) in archive.iter_occupied() {
        let reference = embedding_ref(cell);
        let line = CellLine {
            kind: "cell".into(),
            cell_index: cell,
            centroid: archive.centroid(cell).to_vec(),
            descriptor: slot.candidate.descriptor.clone(),
            fitness_buffer: slot.fitness_buffer().collect(),
            median: slot.median_fitness(),
            text: slot.candidate.text.clone(),
            embedding_ref: reference.clone(),
            eval_count: slot.candidate.eval_count,
            explicit_raw: slot.candidate.explicit_raw.clone(),
        };
        jsonl.push_str(&serde_json::to_string(&line)?);
        jsonl.push('\n');
        n_tokens = slot.candidate.embedding.n_tokens();
        dim = slot.candidate.embedding.dim();
        embeddings.insert(reference, slot.candidate.embedding.flat().to_vec());
    }

    let sidecar = Sidecar {
        n_tokens,
        dim,
        embeddings,
    };
    Ok((jsonl, serde_json::to_string_pretty(&sidecar)?))
}

pub fn export_archive(
    archive: &Archive,
    meta: &SnapshotMeta,
    jsonl_path: &Path,
    sidecar_path: &Path,
) -> Result<()> {
    let (jsonl, sidecar) = export_to_strings(archive, meta)?;
    std::fs::write(jsonl_path, jsonl)?;
    std::fs::write(sidecar_path, sidecar)?;
    Ok(())
}

/// Restore an archive and its meta from snapshot files.
pub fn import_archive(jsonl_path: &Path, sidecar_path: &Path) -> Result<(Archive, SnapshotMeta)> {
    let raw = std::fs::read_to_string(jsonl_path)?;
    let sidecar_raw = std::fs::read_to_string(sidecar_path)?;
    import_from_strings(&raw, &sidecar_raw)
}

pub fn import_from_strings(jsonl: &str, sidecar_raw: &str) -> Result<(Archive, SnapshotMeta)> {
    let sidecar: Sidecar =
        serde_json::from_str(sidecar_raw).map_err(|e| Error::Snapshot(format!("sidecar: {e}")))?;
    let mut lines = jsonl.lines().filter(|l| !l.trim().is_empty());
    let meta_line: MetaLine = match lines.next() {
        Some(first) => serde_json::from_str(first)
            .map_err(|e| Error::Snapshot(format!("meta line: {e}")))?,
        None => return Err(Error::Snapshot("snapshot is empty".into())),
    };
    if meta_line.kind != "meta" {
        return Err(Error::Snapshot(format!(
            "first record must be the meta line, got {:?}",
            meta_line.kind
        )));
    }
    if meta_line.version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "unsupported snapshot version {}",
            meta_line.version
        )));
    }

    let mut cells: Vec<Option<EliteSlot>> = vec![None; meta_line.centroids.len()];
    for (lineno, line) in lines.enumerate() {
        let cell: CellLine = serde_json::from_str(line)
            .map_err(|e| Error::Snapshot(format!("cell line {}: {e}", lineno + 2)))?;
        if cell.kind != "cell" {
            return Err(Error::Snapshot(format!("unexpected record type {:?}", cell.kind)));
        }
        if cell.cell_index >= cells.len() {
            return Err(Error::Snapshot(format!(
                "cell index {} out of range ({} centroids)",
                cell.cell_index,
                cells.len()
            )));
        }
        let flat = sidecar.embeddings.get(&cell.embedding_ref).ok_or_else(|| {
            Error::Snapshot(format!("sidecar missing {:?}", cell.embedding_ref))
        })?;
        let embedding = PromptEmbedding::new(sidecar.n_tokens, sidecar.dim, flat.clone())
            .map_err(|e| Error::Snapshot(format!("embedding {:?}: {e}", cell.embedding_ref)))?;
        let candidate = Candidate {
            text: cell.text,
            embedding,
            descriptor: cell.descriptor,
            explicit_raw: cell.explicit_raw,
            eval_count: cell.eval_count,
        };
        let slot = EliteSlot::restore(candidate, cell.fitness_buffer)?;
        if (slot.median_fitness() - cell.median).abs() > 0.0 {
            return Err(Error::Snapshot(format!(
                "cell {}: stored median {} disagrees with buffer median {}",
                cell.cell_index,
                cell.median,
                slot.median_fitness()
            )));
        }
        cells[cell.cell_index] = Some(slot);
    }

    let archive = Archive::from_parts(
        meta_line.centroids,
        cells,
        meta_line.c_max,
        meta_line.buffer_capacity,
    )?;
    if archive.tau() != meta_line.tau && !(archive.tau().is_infinite() && meta_line.tau.is_infinite())
    {
        return Err(Error::Snapshot(format!(
            "recomputed tau {} disagrees with stored tau {}",
            archive.tau(),
            meta_line.tau
        )));
    }
    let meta = SnapshotMeta {
        version: meta_line.version,
        alpha: meta_line.alpha,
        d_s: meta_line.d_s,
        explicit_kind: meta_line.explicit_kind,
        max_complexity: meta_line.max_complexity,
        max_loc: meta_line.max_loc,
        sidecar: meta_line.sidecar,
    };
    Ok((archive, meta))
}

/// Meta for an engine's current state.
pub fn meta_for_engine(engine: &crate::engine::Engine) -> SnapshotMeta {
    let describer = engine.describer();
    let (max_complexity, max_loc) = describer.normalizer_maxima();
    SnapshotMeta {
        version: SNAPSHOT_VERSION,
        alpha: describer.alpha(),
        d_s: describer.semantic_dim(),
        explicit_kind: describer.explicit_kind_name().to_string(),
        max_complexity,
        max_loc,
        sidecar: "embeddings.json".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, EngineConfig, ReferenceSource};

    fn run_engine(seed: u64, budget: u64) -> Engine {
        let mut cfg = EngineConfig::synthetic_default(seed, budget);
        cfg.cells = 16;
        cfg.max_cells = 24;
        cfg.reference = ReferenceSource::Sampled { size: 80 };
        let mut engine = Engine::new(cfg).unwrap();
        engine.run_to_budget().unwrap();
        engine
    }

    #[test]
    fn export_import_export_is_byte_identical() {
        let engine = run_engine(41, 60);
        let meta = meta_for_engine(&engine);
        let (jsonl, sidecar) = export_to_strings(engine.archive(), &meta).unwrap();
        let (archive, meta_back) = import_from_strings(&jsonl, &sidecar).unwrap();
        assert_eq!(meta_back, meta);
        let (jsonl2, sidecar2) = export_to_strings(&archive, &meta_back).unwrap();
        assert_eq!(jsonl, jsonl2);
        assert_eq!(sidecar, sidecar2);
        assert_eq!(archive.occupied(), engine.archive().occupied());
        assert_eq!(archive.qd_score(), engine.archive().qd_score());
        assert_eq!(archive.tau(), engine.archive().tau());
    }

    #[test]
    fn file_round_trip_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let engine = run_engine(43, 40);
        let meta = meta_for_engine(&engine);
        let jsonl = dir.path().join("archive.jsonl");
        let sidecar = dir.path().join("embeddings.json");
        export_archive(engine.archive(), &meta, &jsonl, &sidecar).unwrap();
        let (archive, _) = import_archive(&jsonl, &sidecar).unwrap();
        for (cell, slot) in engine.archive().iter_occupied() {
            let restored = archive.cell(cell).expect("cell occupied");
            assert_eq!(restored.candidate, slot.candidate);
            assert_eq!(restored.median_fitness(), slot.median_fitness());
        }
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        let engine = run_engine(47, 20);
        let meta = meta_for_engine(&engine);
        let (jsonl, sidecar) = export_to_strings(engine.archive(), &meta).unwrap();

        assert!(import_from_strings("", &sidecar).is_err());
        assert!(import_from_strings(&jsonl, "{").is_err());
        let broken = jsonl.replacen("\"type\":\"meta\"", "\"type\":\"momo\"", 1);
        assert!(import_from_strings(&broken, &sidecar).is_err());
        // Drop the sidecar entries: refs go dangling.
        assert!(import_from_strings(
            &jsonl,
            r#"{"n_tokens": 4, "dim": 16, "embeddings": {}}"#
        )
        .is_err());
    }
}
