//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers. Run with `cargo test -p qd-core --test acceptance`
//! (add `-- --nocapture` to see the lines for passing tests).

use qd_core::archive::{Archive, Candidate};
use qd_core::behavior::code::{code_features, FeatureNormalizer, Paradigm};
use qd_core::behavior::coverage::{hybrid_coverage_gain, CoverageTemplates};
use qd_core::behavior::mi::estimate_nmi;
use qd_core::behavior::semantic::SemanticPipeline;
use qd_core::behavior::fuse;
use qd_core::engine::{BackendSpec, Engine, EngineConfig, OperatorKind, ReferenceSource};
use qd_core::generation::synthetic::{SyntheticConfig, SyntheticLandscape};
use qd_core::generation::{GenerationRequest, GeneratorBackend};
use qd_core::genome::{init_embedding, VocabularyTable};
use qd_core::metrics::{bootstrap_ci, self_bleu, vargha_delaney};
use qd_core::rng::named_stream;
use qd_core::snapshot;
use qd_core::variation::{
    estimate_behavior_gradient, targeted_mutation, MutationState, TargetedMutationConfig,
};
use qd_core::PromptEmbedding;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;

fn elapsed_under(start: Instant, limit_s: f64, what: &str) {
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < limit_s,
        "{what} took {elapsed:.2}s, limit {limit_s}s"
    );
}

fn synthetic_config(seed: u64, budget: u64, noise_sigma: f64) -> EngineConfig {
    let mut cfg = EngineConfig::synthetic_default(seed, budget);
    cfg.backend = BackendSpec::Synthetic {
        config: SyntheticConfig {
            noise_sigma,
            ..SyntheticConfig::default()
        },
    };
    cfg
}

/// Criterion 1: nearest-centroid equals an exhaustive scan on 1000 random
/// queries against 64 centroids, and tau equals the sorted-pairwise-distance
/// nearest-rank 90th percentile after each of 20 sequential expansions.
#[test]
fn criterion_01_archive_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = named_stream(101, "acceptance");
    let dim = 4;
    let reference: Vec<Vec<f64>> = (0..640)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut archive = Archive::from_reference(&reference, 64, 64 + 20, 3, &mut rng).unwrap();
    assert_eq!(archive.len(), 64);

    for query_idx in 0..1000 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..1.5)).collect();
        let (cell, dist) = archive.nearest_centroid(&q).unwrap();
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, c) in archive.centroids().iter().enumerate() {
            let d: f64 = c.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        assert_eq!(cell, best, "query {query_idx}");
        assert!((dist - best_d).abs() < 1e-12);
    }

    let tau_oracle = |centroids: &[Vec<f64>]| -> f64 {
        let mut dists = Vec::new();
        for i in 0..centroids.len() {
            for j in (i + 1)..centroids.len() {
                let d: f64 = centroids[i]
                    .iter()
                    .zip(&centroids[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dists.push(d);
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = (0.9 * dists.len() as f64).ceil() as usize;
        dists[rank - 1]
    };

    // Walk outward along a ray, always clearing the current tau so every
    // insert expands; tau itself grows as distant centroids accumulate.
    let mut position = 2.0;
    for expansion in 0..20 {
        position += 1.5 * archive.tau() + 1.0;
        let fused = vec![position; 4];
        let half: Vec<f64> = fused[..2].iter().map(|x| x / 0.5f64.sqrt()).collect();
        let other: Vec<f64> = fused[2..].iter().map(|x| x / 0.5f64.sqrt()).collect();
        let candidate = Candidate {
            text: format!("expander {expansion}"),
            embedding: PromptEmbedding::new(1, 2, vec![0.0, 0.0]).unwrap(),
            descriptor: fuse(half, other, 0.5).unwrap(),
            explicit_raw: None,
            eval_count: 1,
        };
        let outcome = archive.try_insert(candidate, 0.5).unwrap();
        assert!(
            matches!(outcome, qd_core::InsertOutcome::Expanded { .. }),
            "expansion {expansion} got {outcome:?}"
        );
        assert_eq!(archive.tau(), tau_oracle(archive.centroids()), "after expansion {expansion}");
    }
    assert_eq!(archive.len(), 84);

    elapsed_under(start, 5.0, "criterion 1");
    println!(
        "ACCEPTANCE 1 PASS: 1000 nearest-centroid queries match the scan; tau matches the oracle through 20 expansions ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 2: with zero noise and a fixed seed, two B=500 executions and a
/// checkpoint/resume split at B=250 all produce byte-identical archive
/// exports and run logs.
#[test]
fn criterion_02_determinism_and_resume() {
    let start = Instant::now();
    let make = || Engine::new(synthetic_config(7, 500, 0.0)).unwrap();

    let export = |engine: &Engine| {
        let meta = snapshot::meta_for_engine(engine);
        let (jsonl, sidecar) = snapshot::export_to_strings(engine.archive(), &meta).unwrap();
        let log = qd_core::engine::runlog::to_csv(engine.records());
        (jsonl, sidecar, log)
    };

    let mut a = make();
    a.run_to_budget().unwrap();
    let (jsonl_a, sidecar_a, log_a) = export(&a);

    let mut b = make();
    b.run_to_budget().unwrap();
    let (jsonl_b, sidecar_b, log_b) = export(&b);
    assert_eq!(jsonl_a, jsonl_b, "archive exports differ between runs");
    assert_eq!(sidecar_a, sidecar_b);
    assert_eq!(log_a, log_b, "run logs differ between runs");

    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.bin");
    let mut half = make();
    half.run_steps(250).unwrap();
    half.checkpoint(&ck).unwrap();
    let mut resumed = Engine::resume(&ck).unwrap();
    resumed.run_to_budget().unwrap();
    let (jsonl_c, sidecar_c, log_c) = export(&resumed);
    assert_eq!(jsonl_a, jsonl_c, "archive export differs after resume");
    assert_eq!(sidecar_a, sidecar_c);
    assert_eq!(log_a, log_c, "run log differs after resume");

    elapsed_under(start, 30.0, "criterion 2");
    println!(
        "ACCEPTANCE 2 PASS: byte-identical exports across reruns and a 250/500 checkpoint split ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 3: sigma is a fixed point at the target success rate, and 100
/// steps at p_succ = 0.3 multiply it by exactly e (pre-clamp).
#[test]
fn criterion_03_sigma_adaptation() {
    let mut state = MutationState::new(0.5, 0.1, 0.2, 10).unwrap();
    for i in 0..10 {
        state.record(i < 2); // p_succ = 0.2 = p_target
    }
    let before = state.sigma();
    state.adapt().unwrap();
    assert!((state.sigma() - before).abs() <= 1e-15, "fixed point violated");

    let mut state = MutationState::new(0.5, 0.1, 0.2, 10).unwrap();
    for i in 0..10 {
        state.record(i < 3); // p_succ = 0.3
    }
    for _ in 0..100 {
        state.adapt().unwrap();
    }
    let expected = 0.5 * std::f64::consts::E;
    assert!(
        (state.sigma() - expected).abs() < 1e-9,
        "sigma {} vs 0.5e = {expected}",
        state.sigma()
    );
    println!("ACCEPTANCE 3 PASS: sigma fixed point exact; 100 steps at p_succ=0.3 scale sigma by e within 1e-9");
}

/// Criterion 4: on the linear synthetic landscape the estimated directional
/// deltas equal M e_i within 1e-9, and targeted offspring move toward the
/// target with cosine > 0.5 in at least 80% of 200 trials.
#[test]
fn criterion_04_targeted_gradient_fidelity() {
    let start = Instant::now();

    // Part A: lossless codec, zero noise, linear map.
    let cfg = SyntheticConfig {
        noise_sigma: 0.0,
        quantization: 0.0,
        warp_amplitude: 0.0,
        ..SyntheticConfig::default()
    };
    let landscape = SyntheticLandscape::new(cfg.clone()).unwrap();
    let mut rng = named_stream(104, "acceptance");
    let vocab = VocabularyTable::generated(32, cfg.dim, 0.5, &mut rng).unwrap();
    let parent = init_embedding(&vocab, cfg.n_tokens, 0.1, &mut rng).unwrap();

    let mut noise = named_stream(104, "noise");
    let mut generate = |p: &PromptEmbedding| -> qd_core::Result<String> {
        let request = GenerationRequest::soft_prompt(p.clone(), "t", "req", 0);
        landscape.generate(&request, &mut noise).map(|g| g.text)
    };
    let codec = landscape.codec().clone();
    let mut describe = |text: &str| codec.decode(text);
    let tm_cfg = TargetedMutationConfig::default();
    let estimate = estimate_behavior_gradient(
        &parent,
        &mut generate,
        &mut describe,
        &tm_cfg,
        &mut rng,
    )
    .unwrap();
    assert_eq!(estimate.generator_calls, 9, "k+1 = 9 generator calls");

    let map = landscape.behavior_matrix();
    for (direction, delta) in estimate.directions.iter().zip(&estimate.deltas) {
        for (row, d) in map.iter().zip(delta) {
            let oracle: f64 = row.iter().zip(direction).map(|(a, b)| a * b).sum();
            assert!((d - oracle).abs() < 1e-9, "delta {d} vs M e = {oracle}");
        }
    }

    // Part B: 200 trials of full targeted moves toward random target points.
    let mut hits = 0usize;
    let trials = 200;
    for trial in 0..trials {
        let mut trial_rng = named_stream(10_000 + trial, "acceptance");
        let parent = init_embedding(&vocab, cfg.n_tokens, 0.2, &mut trial_rng).unwrap();
        let base_behavior = landscape.behavior_exact(&parent).unwrap();
        let target: Vec<f64> = (0..cfg.behavior_dim)
            .map(|_| trial_rng.random_range(0.1..0.9))
            .collect();
        let target_delta: Vec<f64> = target
            .iter()
            .zip(&base_behavior)
            .map(|(t, b)| t - b)
            .collect();

        let mut trial_noise = named_stream(20_000 + trial, "noise");
        let mut generate = |p: &PromptEmbedding| -> qd_core::Result<String> {
            let request = GenerationRequest::soft_prompt(p.clone(), "t", "req", 0);
            landscape.generate(&request, &mut trial_noise).map(|g| g.text)
        };
        let mut describe = |text: &str| codec.decode(text);
        let estimate = estimate_behavior_gradient(
            &parent,
            &mut generate,
            &mut describe,
            &tm_cfg,
            &mut trial_rng,
        )
        .unwrap();
        let result = targeted_mutation(
            &parent,
            &target_delta,
            &estimate,
            tm_cfg.gamma,
            0.1,
            &mut trial_rng,
        )
        .unwrap();
        assert!(!result.fell_back);

        let moved = landscape.behavior_exact(&result.offspring).unwrap();
        let actual_delta: Vec<f64> = moved
            .iter()
            .zip(&base_behavior)
            .map(|(m, b)| m - b)
            .collect();
        let dot: f64 = actual_delta.iter().zip(&target_delta).map(|(a, b)| a * b).sum();
        let na: f64 = actual_delta.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nt: f64 = target_delta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na > 0.0 && nt > 0.0 && dot / (na * nt) > 0.5 {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate >= 0.8, "cosine > 0.5 in only {rate:.2} of trials");

    elapsed_under(start, 10.0, "criterion 4");
    println!(
        "ACCEPTANCE 4 PASS: deltas match M e_i within 1e-9; targeted moves aligned in {:.0}% of {trials} trials ({:.2}s)",
        rate * 100.0,
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 5: over 20 paired seeds at B=500, the full operator set beats
/// exploratory-only and frozen-embedding configurations on median QD-score
/// and coverage with Vargha-Delaney A >= 0.7.
///
/// The landscape: anisotropic behavior response (some directions need
/// directed moves), bumps placed away from the initialization region, and a
/// base fitness inside the box so unexplored cells are forgone score.
#[test]
fn criterion_05_ablation_direction() {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..20).collect();

    let run = |seed: u64, variant: &str| -> (f64, f64) {
        let mut cfg = EngineConfig::synthetic_default(seed, 500);
        cfg.cells = 96;
        cfg.max_cells = 128;
        cfg.reference = ReferenceSource::Sampled { size: 960 };
        cfg.backend = BackendSpec::Synthetic {
            config: SyntheticConfig {
                bumps: 24,
                noise_sigma: 0.03,
                center: 0.25,
                anisotropy: 0.3,
                base_fitness: 0.35,
                bump_min: 0.4,
                ..SyntheticConfig::default()
            },
        };
        match variant {
            "full" => {}
            "exploratory" => {
                cfg.p_cross = 0.0;
                cfg.p_targeted = 0.0;
            }
            "frozen" => {
                cfg.p_cross = 0.0;
                cfg.p_targeted = 0.0;
                cfg.freeze_embeddings = true;
            }
            _ => unreachable!(),
        }
        let mut engine = Engine::new(cfg).unwrap();
        engine.run_to_budget().unwrap();
        (engine.archive().qd_score(), engine.archive().coverage())
    };

    let mut results: std::collections::HashMap<&str, (Vec<f64>, Vec<f64>)> = Default::default();
    for variant in ["full", "exploratory", "frozen"] {
        let mut qd = Vec::new();
        let mut coverage = Vec::new();
        for &seed in &seeds {
            let (q, c) = run(seed, variant);
            qd.push(q);
            coverage.push(c);
        }
        results.insert(variant, (qd, coverage));
    }

    let median = |xs: &[f64]| qd_core::metrics::median(xs);
    let (full_qd, full_cov) = &results["full"];
    for ablation in ["exploratory", "frozen"] {
        let (abl_qd, abl_cov) = &results[ablation];
        let a_qd = vargha_delaney(full_qd, abl_qd).unwrap();
        let a_cov = vargha_delaney(full_cov, abl_cov).unwrap();
        assert!(
            median(full_qd) > median(abl_qd),
            "{ablation}: median qd {} vs full {}",
            median(abl_qd),
            median(full_qd)
        );
        assert!(
            median(full_cov) > median(abl_cov),
            "{ablation}: median coverage {} vs full {}",
            median(abl_cov),
            median(full_cov)
        );
        assert!(a_qd >= 0.7, "{ablation}: A(qd) = {a_qd}");
        assert!(a_cov >= 0.7, "{ablation}: A(coverage) = {a_cov}");
        println!(
            "ACCEPTANCE 5 detail: full vs {ablation}: median qd {:.3} vs {:.3} (A={:.2}), median coverage {:.3} vs {:.3} (A={:.2})",
            median(full_qd), median(abl_qd), a_qd, median(full_cov), median(abl_cov), a_cov
        );
    }

    elapsed_under(start, 300.0, "criterion 5");
    println!(
        "ACCEPTANCE 5 PASS: full operator set dominates both ablations over 20 paired seeds ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

mod corpus {
    //! Synthetic text corpora with controlled semantic and explicit factors.
    //! Texts are pure functions of their attributes, so semantic clusters
    //! stay tight and the dependence structure is exact.

    use rand::Rng;

    pub const TOPICS: [[&str; 6]; 8] = [
        ["matrix", "tensor", "algebra", "determinant", "eigenvalue", "basis"],
        ["socket", "packet", "gateway", "payload", "datagram", "subnet"],
        ["meadow", "blossom", "orchard", "petal", "thicket", "bramble"],
        ["ledger", "invoice", "balance", "credit", "payable", "audit"],
        ["quartz", "basalt", "granite", "sediment", "erosion", "stratum"],
        ["violin", "sonata", "tempo", "cadence", "melody", "chord"],
        ["harbor", "vessel", "anchor", "mooring", "ballast", "keel"],
        ["saffron", "ginger", "cumin", "paprika", "turmeric", "clove"],
    ];

    /// Code-shaped text with a chosen paradigm, line count, branch count,
    /// and topic vocabulary. `salt` (when nonzero) adds one marker line so
    /// texts can be made pairwise distinct.
    pub fn make_text(topic: usize, paradigm: usize, lines: usize, branches: usize, salt: u64) -> String {
        let words = &TOPICS[topic % TOPICS.len()];
        let mut text = String::new();
        match paradigm % 4 {
            0 => {
                text.push_str("def process(xs):\n");
                text.push_str("    total = 0\n");
                text.push_str("    for item in xs:\n");
                text.push_str("        total = total + item\n");
            }
            1 => {
                text.push_str("def process(xs):\n");
                text.push_str("    if not xs:\n");
                text.push_str("        return 0\n");
                text.push_str("    return xs[0] + process(xs[1:])\n");
            }
            2 => {
                text.push_str("def process(xs):\n");
                text.push_str("    return list(map(step, xs))\n");
            }
            _ => {
                text.push_str("import collections\n");
                text.push_str("def process(xs):\n");
                text.push_str("    return collections.Counter(xs)\n");
            }
        }
        for _ in 0..branches {
            text.push_str("    if flag(xs):\n        pass\n");
        }
        for j in 0..lines {
            let w = words[j % words.len()];
            let w2 = words[(j + 1) % words.len()];
            text.push_str(&format!("    {w} = {w} + {w2}\n"));
        }
        if salt > 0 {
            text.push_str(&format!("    marker_{salt} = finish()\n"));
        }
        text.push_str("    return result\n");
        text
    }

    /// Independent factors: every attribute is its own draw.
    pub fn factorized(n: usize, rng: &mut impl Rng) -> Vec<String> {
        (0..n)
            .map(|_| {
                make_text(
                    rng.random_range(0..8),
                    rng.random_range(0..4),
                    rng.random_range(1..12),
                    rng.random_range(0..6),
                    0,
                )
            })
            .collect()
    }

    /// Fully dependent: one latent u drives both the semantic content and
    /// the explicit features, so explicit is a function of semantic.
    pub fn dependent(n: usize, rng: &mut impl Rng) -> Vec<String> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>();
                let topic = ((u * 8.0) as usize).min(7);
                let lines = 1 + ((u * 7.13).fract() * 11.0) as usize;
                let branches = ((u * 13.7).fract() * 6.0) as usize;
                let salt = 1 + (u * 1e6) as u64;
                make_text(topic, topic % 4, lines, branches, salt)
            })
            .collect()
    }
}

/// Criterion 6: hybrid descriptors cover at least as many cells as either
/// component on a factorized corpus (20/20 seeds) and match semantic-only
/// coverage within 10% when explicit is a function of semantic.
///
/// The factorized test tessellates each space neutrally (CVT over the
/// reachable descriptor regions), where the product structure shows up; the
/// dependent test tessellates from a same-process reference, the way engine
/// archives are built, where the shared latent leaves no room for hybrid
/// gain.
#[test]
fn criterion_06_hybrid_coverage() {
    let start = Instant::now();
    let alpha = 0.6;

    // One frozen pipeline for the whole family, fitted on a broad reference.
    let mut fit_rng = named_stream(600, "acceptance");
    let fit_corpus = corpus::factorized(400, &mut fit_rng);
    let pipeline = SemanticPipeline::fit_hash_ngram(&fit_corpus, 2, 600, "coverage-reference").unwrap();

    // Running maxima observe a broad mix up front, then stay frozen.
    let normalizer = FeatureNormalizer::new();
    let mut observe_rng = named_stream(601, "acceptance");
    for t in corpus::factorized(500, &mut observe_rng)
        .iter()
        .chain(corpus::dependent(500, &mut observe_rng).iter())
    {
        normalizer.observe(&code_features(t));
    }
    let explicit_fn =
        |t: &str| -> qd_core::Result<Vec<f64>> { Ok(code_features(t).normalized(&normalizer)) };

    let mut factorized_ok = 0;
    let mut dependent_within: Vec<f64> = Vec::new();
    for seed in 0..20u64 {
        let mut rng = named_stream(700 + seed, "acceptance");

        // Factorized corpus against neutral tessellations of the reachable
        // descriptor regions (uniform semantic square; uniform complexity
        // and loc with a uniform one-hot paradigm corner).
        let samples = corpus::factorized(300, &mut rng);
        let mut template_rng = named_stream(800 + seed, "acceptance-template");
        let neutral_sem: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![template_rng.random(), template_rng.random()])
            .collect();
        let neutral_exp: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let mut v = vec![template_rng.random(), template_rng.random(), 0.0, 0.0, 0.0, 0.0];
                v[2 + template_rng.random_range(0..4)] = 1.0;
                v
            })
            .collect();
        let neutral =
            CoverageTemplates::from_reference(&neutral_sem, &neutral_exp, alpha, 48, 800 + seed)
                .unwrap();
        let gain = hybrid_coverage_gain(&samples, &pipeline, &explicit_fn, alpha, &neutral).unwrap();
        assert!(
            gain.cells_hyb >= gain.cells_sem.max(gain.cells_exp),
            "seed {seed}: hyb {} < max(sem {}, exp {})",
            gain.cells_hyb,
            gain.cells_sem,
            gain.cells_exp
        );
        factorized_ok += 1;

        // Dependent corpus against templates fitted to a same-process
        // reference draw, as archive centroids are in practice.
        let samples = corpus::dependent(300, &mut rng);
        let reference = corpus::dependent(400, &mut rng);
        let ref_sem: Vec<Vec<f64>> = reference.iter().map(|t| pipeline.descriptor(t).unwrap()).collect();
        let ref_exp: Vec<Vec<f64>> = reference
            .iter()
            .map(|t| code_features(t).normalized(&normalizer))
            .collect();
        let fitted =
            CoverageTemplates::from_reference(&ref_sem, &ref_exp, alpha, 48, 900 + seed).unwrap();
        let gain = hybrid_coverage_gain(&samples, &pipeline, &explicit_fn, alpha, &fitted).unwrap();
        let ratio =
            (gain.cells_hyb as f64 - gain.cells_sem as f64).abs() / gain.cells_sem as f64;
        dependent_within.push(ratio);
        assert!(
            ratio <= 0.10,
            "seed {seed}: dependent corpus hyb {} vs sem {} (ratio {ratio:.3})",
            gain.cells_hyb,
            gain.cells_sem
        );
    }
    assert_eq!(factorized_ok, 20);

    elapsed_under(start, 60.0, "criterion 6");
    let worst = dependent_within.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "ACCEPTANCE 6 PASS: factorized hybrid >= max components in 20/20 seeds; dependent hyb-vs-sem ratio <= {worst:.3} ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 7: KSG matches the closed-form Gaussian MI within 0.05 nats for
/// rho in {0, 0.3, 0.6, 0.9} at n=5000, k=3, and independent uniforms give
/// |NMI| < 0.05.
#[test]
fn criterion_07_ksg_calibration() {
    let start = Instant::now();
    for (idx, rho) in [0.0f64, 0.3, 0.6, 0.9].into_iter().enumerate() {
        let mut rng = named_stream(7000 + idx as u64, "acceptance");
        let scale = (1.0 - rho * rho).sqrt();
        let mut xs = Vec::with_capacity(5000);
        let mut ys = Vec::with_capacity(5000);
        for _ in 0..5000 {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            xs.push(vec![z1]);
            ys.push(vec![rho * z1 + scale * z2]);
        }
        let expected = -0.5 * (1.0 - rho * rho).ln();
        let estimate = estimate_nmi(&xs, &ys, 3).unwrap();
        assert!(
            (estimate.mi_nats - expected).abs() < 0.05,
            "rho={rho}: I={} vs {expected}",
            estimate.mi_nats
        );
        println!(
            "ACCEPTANCE 7 detail: rho={rho}: I={:.4} (closed form {expected:.4})",
            estimate.mi_nats
        );
    }

    let mut rng = named_stream(7100, "acceptance");
    let xs: Vec<Vec<f64>> = (0..5000).map(|_| vec![rng.random::<f64>()]).collect();
    let ys: Vec<Vec<f64>> = (0..5000).map(|_| vec![rng.random::<f64>()]).collect();
    let estimate = estimate_nmi(&xs, &ys, 3).unwrap();
    assert!(estimate.nmi_defined);
    assert!(
        estimate.nmi.abs() < 0.05,
        "independent uniforms: |NMI| = {}",
        estimate.nmi.abs()
    );

    elapsed_under(start, 60.0, "criterion 7");
    println!(
        "ACCEPTANCE 7 PASS: Gaussian MI within 0.05 nats at all four correlations; uniform NMI {:.4} ({:.2}s)",
        estimate.nmi,
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 8: with noise sigma = 0.1, buffered-median archives estimate
/// elite fitness with lower mean error than single-evaluation archives over
/// 20 paired seeds (A >= 0.7).
#[test]
fn criterion_08_buffered_evaluation_benefit() {
    let start = Instant::now();
    let landscape = SyntheticLandscape::new(SyntheticConfig {
        noise_sigma: 0.1,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let codec = landscape.codec();

    let run_error = |seed: u64, buffer_capacity: usize| -> f64 {
        let mut cfg = synthetic_config(seed, 500, 0.1);
        cfg.buffer_capacity = buffer_capacity;
        let mut engine = Engine::new(cfg).unwrap();
        engine.run_to_budget().unwrap();
        let mut total = 0.0;
        let mut count = 0usize;
        for (_, slot) in engine.archive().iter_occupied() {
            let behavior = codec.decode(&slot.candidate.text).unwrap();
            let truth = landscape.fitness_of_behavior(&behavior);
            total += (slot.median_fitness() - truth).abs();
            count += 1;
        }
        total / count as f64
    };

    let mut buffered = Vec::new();
    let mut single = Vec::new();
    for seed in 0..20u64 {
        buffered.push(run_error(seed, 3));
        single.push(run_error(seed, 1));
    }
    let med = |xs: &[f64]| qd_core::metrics::median(xs);
    let a = vargha_delaney(&single, &buffered).unwrap();
    assert!(
        med(&buffered) < med(&single),
        "buffered {} vs single {}",
        med(&buffered),
        med(&single)
    );
    assert!(a >= 0.7, "A(single > buffered) = {a}");

    elapsed_under(start, 120.0, "criterion 8");
    println!(
        "ACCEPTANCE 8 PASS: buffered median error {:.4} < single-eval {:.4}, A = {:.2} ({:.2}s)",
        med(&buffered),
        med(&single),
        a,
        start.elapsed().as_secs_f64()
    );
}

/// Criterion 9: the paradigm classifier agrees with the bundled hand labels
/// on at least 90% of the 40-snippet fixture set.
#[test]
fn criterion_09_paradigm_classifier() {
    let raw = include_str!("../fixtures/paradigm_corpus.jsonl");
    let mut total = 0usize;
    let mut agree = 0usize;
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        let code = record["code"].as_str().unwrap();
        let label = Paradigm::from_str_loose(record["label"].as_str().unwrap()).unwrap();
        total += 1;
        if code_features(code).paradigm == label {
            agree += 1;
        }
    }
    assert_eq!(total, 40, "fixture must hold 40 snippets");
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.9, "agreement {agree}/{total} = {rate:.3}");
    println!("ACCEPTANCE 9 PASS: paradigm classifier agrees on {agree}/40 snippets ({:.1}%)", rate * 100.0);
}

/// Criterion 10: statistics oracles. The Vargha-Delaney hand enumeration is
/// exact, the 3-text self-BLEU fixture matches the manual n-gram oracle to
/// 1e-9, and bootstrap CIs are deterministic under a fixed seed.
#[test]
fn criterion_10_statistics_oracles() {
    // Hand enumeration (wins + half-ties over 9 pairs): [3,3,2] vs [2,4,4]
    // has 2 wins and 1 tie -> A = 2.5/9 = 0.2778 exactly.
    let a = vargha_delaney(&[3.0, 3.0, 2.0], &[2.0, 4.0, 4.0]).unwrap();
    assert_eq!(a, 2.5 / 9.0);
    // The definitional identity per the formula, on another enumerated case:
    // [1,2,3] vs [2,2,4] has 2 wins and 2 ties -> 3/9.
    let b = vargha_delaney(&[1.0, 2.0, 3.0], &[2.0, 2.0, 4.0]).unwrap();
    assert_eq!(b, 3.0 / 9.0);

    // Manual BLEU oracle for a 3-text fixture (counts worked by hand):
    //   t1 = the cat sat on the mat, t2 = the cat sat on the hat,
    //   t3 = a dog ran in the park.
    // BLEU(t1 | t2,t3): p1=5/6, p2=4/5, p3=3/4, p4=2/3, BP=1
    //   -> (5/6 * 4/5 * 3/4 * 2/3)^(1/4) = (1/3)^(1/4).
    // BLEU(t2 | t1,t3) is symmetric -> (1/3)^(1/4).
    // BLEU(t3 | t1,t2): only "the" overlaps at n=1 and no 2-gram matches
    //   -> 0.
    // self-BLEU = 2 * (1/3)^(1/4) / 3.
    let texts = vec![
        "the cat sat on the mat".to_string(),
        "the cat sat on the hat".to_string(),
        "a dog ran in the park".to_string(),
    ];
    let oracle = 2.0 * (1.0f64 / 3.0).powf(0.25) / 3.0;
    let measured = self_bleu(&texts, 4).unwrap();
    assert!(
        (measured - oracle).abs() < 1e-9,
        "self-BLEU {measured} vs oracle {oracle}"
    );

    let sample: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64) / 17.0).collect();
    let first = bootstrap_ci(&sample, &qd_core::metrics::median, 1000, 0.95, 5).unwrap();
    let second = bootstrap_ci(&sample, &qd_core::metrics::median, 1000, 0.95, 5).unwrap();
    assert_eq!(first, second, "bootstrap must be deterministic per seed");

    println!(
        "ACCEPTANCE 10 PASS: VD enumeration exact (0.2778), self-BLEU matches the manual oracle ({measured:.9}), bootstrap deterministic"
    );
}

/// Criterion 11: generator-call totals in the run log equal the per-operator
/// charge model exactly over a 1000-iteration mixed run (targeted charges
/// k+2 = 10; crossover and exploratory charge 1).
#[test]
fn criterion_11_budget_accounting() {
    let mut engine = Engine::new(synthetic_config(11, 1000, 0.05)).unwrap();
    engine.run_to_budget().unwrap();
    assert_eq!(engine.records().len(), 1000);

    let k = engine.config().targeted.k_directions as u64;
    assert_eq!(k, 8);
    let mut expected = 0u64;
    let mut counts = [0u64; 3]; // crossover, targeted(+fallback), exploratory
    for record in engine.records() {
        expected += match record.operator {
            OperatorKind::Crossover => {
                counts[0] += 1;
                1
            }
            OperatorKind::Targeted | OperatorKind::TargetedFallback => {
                counts[1] += 1;
                k + 2
            }
            OperatorKind::Exploratory => {
                counts[2] += 1;
                1
            }
        };
        assert!(
            record.generator_calls == 1 || record.generator_calls == k + 2,
            "iteration {}: unexpected call count {}",
            record.iteration,
            record.generator_calls
        );
    }
    let logged: u64 = engine.records().iter().map(|r| r.generator_calls).sum();
    assert_eq!(logged, expected, "per-record totals disagree with the charge model");
    let loop_calls = engine.counters().generator_calls - engine.counters().init_generator_calls;
    assert_eq!(loop_calls, expected, "engine counters disagree with the charge model");
    assert!(counts.iter().all(|&c| c > 0), "mixed run must use every operator: {counts:?}");

    println!(
        "ACCEPTANCE 11 PASS: {logged} generator calls = {} crossover + {} targeted x{} + {} exploratory",
        counts[0],
        counts[1],
        k + 2,
        counts[2]
    );
}
