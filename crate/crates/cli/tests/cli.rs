//! End-to-end CLI tests driving the built binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn qd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qd"))
}

fn write_config(dir: &Path, seed: u64, budget: u64) -> PathBuf {
    let cfg = qd_core::EngineConfig::synthetic_default(seed, budget);
    let path = dir.join("config.json");
    cfg.save(&path).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn missing_config_exits_with_config_code_and_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = qd()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    for name in ["archive.jsonl", "runlog.csv", "metrics.json", "embeddings.json"] {
        assert!(!out.join(name).exists(), "{name} must not exist");
    }
}

#[test]
fn identical_runs_produce_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 7, 40);
    for out in ["a", "b"] {
        let status = qd()
            .args(["run", "--quiet", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for name in ["archive.jsonl", "embeddings.json", "runlog.csv", "metrics.json"] {
        let a = read(&dir.path().join("a").join(name));
        let b = read(&dir.path().join("b").join(name));
        assert_eq!(a, b, "{name} differs between identical runs");
        assert!(!a.is_empty());
    }
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 7, 30);
    for (out, seed) in [("a", "7"), ("b", "8")] {
        let status = qd()
            .args(["run", "--quiet", "--config"])
            .arg(&config)
            .args(["--seed", seed, "--out"])
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    assert_ne!(
        read(&dir.path().join("a").join("runlog.csv")),
        read(&dir.path().join("b").join("runlog.csv"))
    );
}

#[test]
fn batch_then_compare_has_one_sample_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 0, 25);
    for (name, seeds) in [("batch-a", "0..10"), ("batch-b", "10..20")] {
        let status = qd()
            .args(["batch", "--quiet", "--config"])
            .arg(&config)
            .args(["--seeds", seeds, "--jobs", "4", "--out"])
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "batch {name} failed");
    }
    for seed in 0..10 {
        assert!(dir
            .path()
            .join("batch-a")
            .join(format!("seed-{seed:04}"))
            .join("metrics.json")
            .exists());
    }

    let report_path = dir.path().join("report.json");
    let status = qd()
        .args(["compare", "--a"])
        .arg(dir.path().join("batch-a"))
        .arg("--b")
        .arg(dir.path().join("batch-b"))
        .args(["--n-bootstrap", "200", "--out"])
        .arg(&report_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let report: serde_json::Value = serde_json::from_str(&read(&report_path)).unwrap();
    let metrics = report["metrics"].as_array().unwrap();
    assert_eq!(metrics.len(), 2);
    for metric in metrics {
        assert_eq!(metric["a_samples"].as_array().unwrap().len(), 10);
        assert_eq!(metric["b_samples"].as_array().unwrap().len(), 10);
        let a = metric["vargha_delaney_a"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
        let ci = &metric["a_median_ci"];
        assert!(ci[0].as_f64().unwrap() <= ci[1].as_f64().unwrap());
    }
}

#[test]
fn export_dynamics_aggregates_batch_runlogs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 0, 20);
    let batch = dir.path().join("batch");
    let status = qd()
        .args(["batch", "--quiet", "--config"])
        .arg(&config)
        .args(["--seeds", "0-2", "--out"])
        .arg(&batch)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let out = dir.path().join("dynamics.csv");
    let status = qd()
        .args(["export-dynamics", "--runs"])
        .arg(&batch)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = read(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "iteration,median,q1,q3");
    assert_eq!(lines.count(), 20, "one row per logged iteration");
}

#[test]
fn inspect_cell_and_top_k() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 3, 40);
    let out = dir.path().join("out");
    let status = qd()
        .args(["run", "--quiet", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let archive = out.join("archive.jsonl");

    let top = qd()
        .args(["inspect", "--json", "--archive"])
        .arg(&archive)
        .args(["--query", "top-k:3"])
        .output()
        .unwrap();
    assert!(top.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&top.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    let medians: Vec<f64> = rows
        .iter()
        .map(|r| r["median_fitness"].as_f64().unwrap())
        .collect();
    let sorted = {
        let mut s = medians.clone();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    };
    assert_eq!(medians, sorted, "top-k must be sorted descending");

    let best_cell = rows[0]["cell"].as_u64().unwrap();
    let cell = qd()
        .args(["inspect", "--json", "--archive"])
        .arg(&archive)
        .args(["--query", &format!("cell:{best_cell}")])
        .output()
        .unwrap();
    assert!(cell.status.success());
    let cell: serde_json::Value = serde_json::from_slice(&cell.stdout).unwrap();
    assert_eq!(cell["cell"].as_u64().unwrap(), best_cell);
    assert!(cell["text"].as_str().unwrap().starts_with("bhv"));
    assert_eq!(cell["median_fitness"].as_f64().unwrap(), medians[0]);

    // Synthetic archives carry no paradigm features.
    let histogram = qd()
        .args(["inspect", "--archive"])
        .arg(&archive)
        .args(["--query", "paradigm-histogram"])
        .status()
        .unwrap();
    assert_eq!(histogram.code(), Some(2));
}

/// Build a code-flavored snapshot by hand: 10 occupied cells, 3 recursive.
#[test]
fn paradigm_histogram_counts_cells() {
    use qd_core::archive::{Archive, Candidate};
    use qd_core::behavior::fuse;
    use qd_core::snapshot::{export_archive, SnapshotMeta};
    use qd_core::PromptEmbedding;

    let dir = tempfile::tempdir().unwrap();
    let mut rng = qd_core::rng::named_stream(5, "init");
    // Deterministic low-discrepancy values; no RNG needed for the cloud.
    // Distinct multipliers per coordinate keep the points off a single line.
    const MULTIPLIERS: [usize; 4] = [37, 53, 71, 89];
    let unit = |i: usize, salt: usize| {
        ((i * MULTIPLIERS[salt % MULTIPLIERS.len()] + salt) % 101) as f64 / 101.0
    };
    // The reference cloud goes through the same fuse() construction the
    // candidates use, so centroids sit where candidates can actually land.
    let make_fused = |i: usize, paradigm: usize| {
        let mut one_hot = [0.0; 4];
        one_hot[paradigm] = 1.0;
        let sem = vec![unit(i, 0), unit(i, 1)];
        let mut exp = vec![unit(i, 2), unit(i, 3)];
        exp.extend_from_slice(&one_hot);
        fuse(sem, exp, 0.6).unwrap()
    };
    let reference: Vec<Vec<f64>> = (0..200).map(|i| make_fused(i, i % 4).fused).collect();
    let mut archive = Archive::from_reference(&reference, 32, 48, 3, &mut rng).unwrap();

    let mut attempt = 0;
    while archive.occupied() < 10 {
        attempt += 1;
        let paradigm = if archive.occupied() < 3 { 1 } else { 0 }; // recursive else iterative
        let descriptor = make_fused(attempt, paradigm);
        let candidate = Candidate {
            text: format!("def f{attempt}(): pass"),
            embedding: PromptEmbedding::new(1, 2, vec![0.0, 0.0]).unwrap(),
            descriptor,
            explicit_raw: Some(vec![1.0, 1.0]),
            eval_count: 1,
        };
        archive.try_insert(candidate, 0.5).unwrap();
        assert!(attempt < 1000, "could not occupy 10 cells");
    }

    let meta = SnapshotMeta {
        version: 1,
        alpha: 0.6,
        d_s: 2,
        explicit_kind: "code".into(),
        max_complexity: 1.0,
        max_loc: 1.0,
        sidecar: "embeddings.json".into(),
    };
    let jsonl = dir.path().join("archive.jsonl");
    let sidecar = dir.path().join("embeddings.json");
    export_archive(&archive, &meta, &jsonl, &sidecar).unwrap();

    let output = qd()
        .args(["inspect", "--json", "--archive"])
        .arg(&jsonl)
        .args(["--query", "paradigm-histogram"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let histogram: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(histogram["recursive"]["cells"].as_u64().unwrap(), 3);
    assert_eq!(histogram["iterative"]["cells"].as_u64().unwrap(), 7);
    let fraction = histogram["recursive"]["fraction"].as_f64().unwrap();
    assert!((fraction - 0.3).abs() < 1e-12);
}

#[test]
fn validate_config_accepts_good_and_rejects_perturbed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 1, 10);
    let status = qd()
        .args(["validate-config", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let base: serde_json::Value = serde_json::from_str(&read(&config)).unwrap();
    let perturbations: Vec<(&str, serde_json::Value)> = vec![
        ("alpha", serde_json::json!(1.5)),
        ("p_cross", serde_json::json!(-0.1)),
        ("p_targeted", serde_json::json!(0.9)), // p_cross + p_targeted > 1
        ("reeval_fraction", serde_json::json!(0.0)),
        ("cells", serde_json::json!(0)),
        ("max_cells", serde_json::json!(1)),
        ("buffer_capacity", serde_json::json!(0)),
        ("init_sigma", serde_json::json!(-0.5)),
        ("reeval_period", serde_json::json!(0)),
    ];
    for (field, value) in perturbations {
        let mut bad = base.clone();
        bad[field] = value;
        let path = dir.path().join(format!("bad-{field}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&bad).unwrap()).unwrap();
        let status = qd()
            .args(["validate-config", "--config"])
            .arg(&path)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(2), "perturbed {field} must be rejected");
    }

    // Unknown field.
    let mut bad = base.clone();
    bad["mystery_knob"] = serde_json::json!(3);
    let path = dir.path().join("bad-unknown.json");
    std::fs::write(&path, serde_json::to_string_pretty(&bad).unwrap()).unwrap();
    let status = qd()
        .args(["validate-config", "--config"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn checkpointed_run_can_resume_to_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 11, 30);

    let full = dir.path().join("full");
    let status = qd()
        .args(["run", "--quiet", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&full)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // First half only, leaving a checkpoint behind.
    let half = dir.path().join("half");
    let status = qd()
        .args(["run", "--quiet", "--config"])
        .arg(&config)
        .args(["--budget", "15", "--checkpoint-every", "15", "--out"])
        .arg(&half)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let checkpoint = half.join("checkpoint.bin");
    assert!(checkpoint.exists());

    // The checkpoint froze budget=15, so resuming replays exactly the first
    // half; its outputs must be a prefix of the full run's.
    let resumed = dir.path().join("resumed");
    let status = qd()
        .args(["run", "--quiet", "--resume"])
        .arg(&checkpoint)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&resumed)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let full_log = read(&full.join("runlog.csv"));
    let resumed_log = read(&resumed.join("runlog.csv"));
    let full_head: Vec<&str> = full_log.lines().take(16).collect();
    let resumed_lines: Vec<&str> = resumed_log.lines().collect();
    assert_eq!(resumed_lines.len(), 16);
    assert_eq!(full_head, resumed_lines);
}
