//! Subcommand implementations.

use anyhow::{anyhow, bail, Context};
use qd_core::engine::{runlog, BackendSpec, Engine, EngineConfig};
use qd_core::generation::synthetic::SyntheticConfig;
use qd_core::{metrics, snapshot};
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::{EXIT_BACKEND, EXIT_CONFIG, EXIT_INTERNAL};

/// Map an error chain onto the documented exit codes.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<qd_core::Error>() {
            return match core {
                qd_core::Error::Config(_)
                | qd_core::Error::Dimension { .. }
                | qd_core::Error::Json(_)
                | qd_core::Error::Fit(_) => EXIT_CONFIG,
                qd_core::Error::Backend { .. } => EXIT_BACKEND,
                _ => EXIT_INTERNAL,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_CONFIG;
            }
        }
    }
    EXIT_INTERNAL
}

pub struct RunArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub backend: Option<String>,
    pub budget: Option<u64>,
    pub checkpoint_every: Option<u64>,
    pub resume: Option<PathBuf>,
    pub quiet: bool,
}

fn load_config(path: &Path, args_seed: Option<u64>, backend: &Option<String>, budget: Option<u64>) -> anyhow::Result<EngineConfig> {
    if !path.exists() {
        return Err(anyhow::Error::new(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("config file {} does not exist", path.display()),
        )));
    }
    let mut cfg = EngineConfig::load(path).context("loading config")?;
    if let Some(seed) = args_seed {
        cfg.seed = seed;
    }
    if let Some(budget) = budget {
        cfg.budget = budget;
    }
    if let Some(kind) = backend {
        cfg.backend = match kind.as_str() {
            "synthetic" => {
                let config = match &cfg.backend {
                    BackendSpec::Synthetic { config } => config.clone(),
                    _ => SyntheticConfig {
                        n_tokens: cfg.n_tokens,
                        dim: cfg.dim,
                        ..SyntheticConfig::default()
                    },
                };
                BackendSpec::Synthetic { config }
            }
            "remote" => BackendSpec::Remote,
            other => {
                return Err(anyhow::Error::new(qd_core::Error::Config(format!(
                    "unknown backend override {other:?} (expected synthetic or remote)"
                ))))
            }
        };
        cfg.validate().context("validating config after overrides")?;
    }
    Ok(cfg)
}

pub fn run(args: RunArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output dir {}", args.out.display()))?;

    let mut engine = match &args.resume {
        Some(path) => Engine::resume(path).context("resuming checkpoint")?,
        None => {
            let cfg = load_config(&args.config, args.seed, &args.backend, args.budget)?;
            Engine::new(cfg).context("initializing engine")?
        }
    };

    let checkpoint_path = args.out.join("checkpoint.bin");
    let run_result = match args.checkpoint_every {
        Some(every) if every > 0 => {
            let mut result = Ok(());
            while engine.iteration() < engine.config().budget {
                if let Err(e) = engine.run_steps(every) {
                    result = Err(e);
                    break;
                }
                engine.checkpoint(&checkpoint_path)?;
            }
            result
        }
        _ => engine.run_to_budget(),
    };

    if let Err(e) = run_result {
        // Backend hard-down: abort with a checkpoint; outputs stay .partial.
        engine.checkpoint(&checkpoint_path).ok();
        write_outputs(&engine, &args.out, false)?;
        return Err(anyhow::Error::new(e).context("run aborted; checkpoint written"));
    }

    write_outputs(&engine, &args.out, true)?;
    if !args.quiet {
        let s = engine.summary();
        println!(
            "seed {} budget {} qd_score {:.4} coverage {:.4} occupied {}/{}",
            s.seed, s.budget, s.qd_score, s.coverage, s.occupied, s.cells
        );
    }
    Ok(())
}

/// Write archive.jsonl, embeddings.json, runlog.csv, metrics.json. Files are
/// staged with a .partial suffix and renamed only on `finalize`.
fn write_outputs(engine: &Engine, out: &Path, finalize: bool) -> anyhow::Result<()> {
    let meta = snapshot::meta_for_engine(engine);
    let (jsonl, sidecar) = snapshot::export_to_strings(engine.archive(), &meta)?;
    let runlog_csv = runlog::to_csv(engine.records());
    let metrics_json = serde_json::to_string_pretty(&engine.summary())?;

    let files = [
        ("archive.jsonl", jsonl),
        ("embeddings.json", sidecar),
        ("runlog.csv", runlog_csv),
        ("metrics.json", metrics_json),
    ];
    for (name, contents) in &files {
        let partial = out.join(format!("{name}.partial"));
        std::fs::write(&partial, contents)
            .with_context(|| format!("writing {}", partial.display()))?;
    }
    if finalize {
        for (name, _) in &files {
            let partial = out.join(format!("{name}.partial"));
            std::fs::rename(&partial, out.join(name))
                .with_context(|| format!("finalizing {name}"))?;
        }
    }
    Ok(())
}

/// Parse `lo..hi` (half-open) or `lo-hi` (inclusive) seed ranges.
fn parse_seed_range(raw: &str) -> anyhow::Result<Vec<u64>> {
    let parse = |s: &str| -> anyhow::Result<u64> {
        s.trim()
            .parse()
            .map_err(|_| anyhow::Error::new(qd_core::Error::Config(format!("bad seed {s:?}"))))
    };
    if let Some((lo, hi)) = raw.split_once("..") {
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if hi <= lo {
            bail!("empty seed range {raw:?}");
        }
        return Ok((lo..hi).collect());
    }
    if let Some((lo, hi)) = raw.split_once('-') {
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if hi < lo {
            bail!("empty seed range {raw:?}");
        }
        return Ok((lo..=hi).collect());
    }
    Ok(vec![parse(raw)?])
}

pub fn batch(
    config: PathBuf,
    seeds: &str,
    out: PathBuf,
    jobs: usize,
    backend: Option<String>,
    budget: Option<u64>,
    quiet: bool,
) -> anyhow::Result<()> {
    // Fail fast on a bad config before spawning anything.
    load_config(&config, None, &backend, budget)?;
    let seeds = parse_seed_range(seeds)?;
    std::fs::create_dir_all(&out)?;
    let exe = std::env::current_exe().context("locating qd binary")?;

    let queue: Mutex<VecDeque<u64>> = Mutex::new(seeds.iter().copied().collect());
    let failures: Mutex<Vec<(u64, String)>> = Mutex::new(Vec::new());
    let jobs = jobs.max(1);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(seeds.len()) {
            scope.spawn(|| loop {
                let seed = match queue.lock().expect("queue lock").pop_front() {
                    Some(seed) => seed,
                    None => break,
                };
                let seed_out = out.join(format!("seed-{seed:04}"));
                let mut command = std::process::Command::new(&exe);
                command
                    .arg("run")
                    .arg("--config")
                    .arg(&config)
                    .arg("--seed")
                    .arg(seed.to_string())
                    .arg("--out")
                    .arg(&seed_out)
                    .arg("--quiet");
                if let Some(kind) = &backend {
                    command.arg("--backend").arg(kind);
                }
                if let Some(budget) = budget {
                    command.arg("--budget").arg(budget.to_string());
                }
                match command.status() {
                    Ok(status) if status.success() => {
                        if !quiet {
                            println!("seed {seed}: done");
                        }
                    }
                    Ok(status) => failures
                        .lock()
                        .expect("failures lock")
                        .push((seed, format!("exit status {status}"))),
                    Err(e) => failures
                        .lock()
                        .expect("failures lock")
                        .push((seed, format!("spawn failed: {e}"))),
                }
            });
        }
    });

    let failures = failures.into_inner().expect("failures lock");
    if !failures.is_empty() {
        bail!(
            "{} of {} seeds failed: {:?}",
            failures.len(),
            seeds.len(),
            failures
        );
    }
    Ok(())
}

pub fn inspect(archive_path: PathBuf, query: &str, json: bool) -> anyhow::Result<()> {
    let raw = std::fs::read_to_string(&archive_path)
        .with_context(|| format!("reading {}", archive_path.display()))?;
    let meta_line: serde_json::Value = serde_json::from_str(raw.lines().next().unwrap_or(""))
        .context("parsing snapshot meta line")?;
    let sidecar_name = meta_line["sidecar"]
        .as_str()
        .ok_or_else(|| anyhow!("meta line lacks a sidecar reference"))?;
    let sidecar_path = archive_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(sidecar_name);
    let sidecar_raw = std::fs::read_to_string(&sidecar_path)
        .with_context(|| format!("reading sidecar {}", sidecar_path.display()))?;
    let (archive, meta) = snapshot::import_from_strings(&raw, &sidecar_raw)?;

    if let Some(cell) = query.strip_prefix("cell:") {
        let cell: usize = cell
            .parse()
            .map_err(|_| anyhow::Error::new(qd_core::Error::Config(format!("bad cell index {cell:?}"))))?;
        let slot = archive
            .cell(cell)
            .ok_or_else(|| anyhow!("cell {cell} is empty or out of range"))?;
        if json {
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "cell": cell,
                    "median_fitness": slot.median_fitness(),
                    "fitness_buffer": slot.fitness_buffer().collect::<Vec<_>>(),
                    "eval_count": slot.candidate.eval_count,
                    "descriptor": slot.candidate.descriptor,
                    "text": slot.candidate.text,
                }))?
            );
        } else {
            println!("cell {cell}");
            println!("  median fitness: {}", slot.median_fitness());
            println!(
                "  buffer: {:?}",
                slot.fitness_buffer().collect::<Vec<_>>()
            );
            println!("  evaluations: {}", slot.candidate.eval_count);
            println!("  text: {}", slot.candidate.text);
        }
        return Ok(());
    }

    if let Some(k) = query.strip_prefix("top-k:") {
        let k: usize = k
            .parse()
            .map_err(|_| anyhow::Error::new(qd_core::Error::Config(format!("bad k {k:?}"))))?;
        let mut cells: Vec<(usize, f64)> = archive
            .iter_occupied()
            .map(|(i, slot)| (i, slot.median_fitness()))
            .collect();
        cells.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite medians").then(a.0.cmp(&b.0)));
        cells.truncate(k);
        if json {
            let rows: Vec<serde_json::Value> = cells
                .iter()
                .map(|(i, m)| serde_json::json!({"cell": i, "median_fitness": m}))
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows)?);
        } else {
            for (i, m) in cells {
                println!("cell {i}: median fitness {m}");
            }
        }
        return Ok(());
    }

    if query == "paradigm-histogram" {
        if meta.explicit_kind != "code" {
            return Err(anyhow::Error::new(qd_core::Error::Config(format!(
                "paradigm histogram needs a code archive, this one is {:?}",
                meta.explicit_kind
            ))));
        }
        // Explicit code layout: [complexity, loc, iterative, recursive,
        // functional, library].
        let names = ["iterative", "recursive", "functional", "library"];
        let mut counts = [0usize; 4];
        let mut total = 0usize;
        for (_, slot) in archive.iter_occupied() {
            let explicit = &slot.candidate.descriptor.explicit;
            if explicit.len() < 6 {
                bail!("descriptor explicit block too short for code features");
            }
            let paradigm = explicit[2..6]
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite"))
                .map(|(i, _)| i)
                .expect("non-empty");
            counts[paradigm] += 1;
            total += 1;
        }
        if json {
            let mut map = serde_json::Map::new();
            for (name, &count) in names.iter().zip(&counts) {
                let fraction = if total > 0 { count as f64 / total as f64 } else { 0.0 };
                map.insert(
                    name.to_string(),
                    serde_json::json!({"cells": count, "fraction": fraction}),
                );
            }
            println!("{}", serde_json::to_string_pretty(&serde_json::Value::Object(map))?);
        } else if total == 0 {
            println!("archive is empty");
        } else {
            for (name, &count) in names.iter().zip(&counts) {
                println!("{name}: {count} cells ({:.3})", count as f64 / total as f64);
            }
        }
        return Ok(());
    }

    Err(anyhow::Error::new(qd_core::Error::Config(format!(
        "unknown query {query:?} (expected cell:<i>, top-k:<k>, or paradigm-histogram)"
    ))))
}

/// Pull (qd_score, coverage) samples out of a batch directory.
fn batch_samples(dir: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading batch dir {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("seed-"))
                    .unwrap_or(false)
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no seed-* directories under {}", dir.display());
    }
    let mut qd = Vec::with_capacity(entries.len());
    let mut coverage = Vec::with_capacity(entries.len());
    for entry in entries {
        let metrics_path = entry.join("metrics.json");
        let raw = std::fs::read_to_string(&metrics_path)
            .with_context(|| format!("reading {}", metrics_path.display()))?;
        let summary: qd_core::EngineSummary = serde_json::from_str(&raw)?;
        qd.push(summary.qd_score);
        coverage.push(summary.coverage);
    }
    Ok((qd, coverage))
}

pub fn compare(
    a: PathBuf,
    b: PathBuf,
    out: PathBuf,
    n_bootstrap: usize,
    seed: u64,
) -> anyhow::Result<()> {
    let (qd_a, cov_a) = batch_samples(&a)?;
    let (qd_b, cov_b) = batch_samples(&b)?;
    let report = metrics::compare_methods(
        a.display().to_string(),
        b.display().to_string(),
        &[
            ("qd_score".to_string(), qd_a, qd_b),
            ("coverage".to_string(), cov_a, cov_b),
        ],
        n_bootstrap,
        0.95,
        seed,
    )?;
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn export_dynamics(runs: PathBuf, out: PathBuf) -> anyhow::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&runs)
        .with_context(|| format!("reading {}", runs.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("runlog.csv"))
        .filter(|p| p.exists())
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no seed-*/runlog.csv files under {}", runs.display());
    }
    let mut series = Vec::with_capacity(entries.len());
    for path in &entries {
        let raw = std::fs::read_to_string(path)?;
        let records = runlog::parse_csv(&raw)?;
        series.push(
            records
                .iter()
                .map(|r| (r.iteration, r.coverage))
                .collect::<Vec<_>>(),
        );
    }
    let rows = metrics::coverage_dynamics(&series)?;
    std::fs::write(&out, metrics::dynamics_to_csv(&rows))?;
    println!("wrote {} ({} runs, {} checkpoints)", out.display(), series.len(), rows.len());
    Ok(())
}

pub fn validate_config(config: PathBuf) -> anyhow::Result<()> {
    if !config.exists() {
        return Err(anyhow::Error::new(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("config file {} does not exist", config.display()),
        )));
    }
    let cfg = EngineConfig::load(&config)?;
    println!(
        "ok: seed {} budget {} cells {} backend {}",
        cfg.seed,
        cfg.budget,
        cfg.cells,
        match cfg.backend {
            BackendSpec::Synthetic { .. } => "synthetic",
            BackendSpec::Remote => "remote",
            BackendSpec::Fixture { .. } => "fixture",
        }
    );
    Ok(())
}
