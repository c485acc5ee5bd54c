//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mmdd_core::artifact;
use mmdd_core::data::{generate_synthetic, write_dataset, Dataset, Label, Sample, SignalStrength, SyntheticSpec};
use mmdd_core::evaluation::{roc_auc, run_cross_validation, subject_kfold, MetricsReport};
use mmdd_core::extractors::TextMode;
use mmdd_core::fusion::{FusionScheme, Modality};
use mmdd_core::gradcheck::FD_TOLERANCE;
use mmdd_core::model::{DeceptionModel, ModelConfig, Preprocessing};
use mmdd_core::training::{cross_entropy, train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn synthetic(samples: usize, subjects: usize, strength: f64, seed: u64) -> Dataset {
    let spec = SyntheticSpec {
        samples,
        subjects,
        strength: SignalStrength::uniform(strength),
        seed,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).expect("synthetic spec is valid").dataset
}

fn gradients() -> Outcome {
    let mut worst = (0.0f64, String::new());
    let mut tensors = 0;
    for seed in 0..10 {
        let checks = common::layer_checks(seed)
            .into_iter()
            .chain(common::model_checks(seed, FusionScheme::HadamardConcat, TextMode::NonStatic, 12));
        for c in checks {
            tensors += 1;
            if c.rel_error >= worst.0 {
                worst = (c.rel_error, format!("{} (seed {seed})", c.name));
            }
        }
    }
    outcome(
        worst.0 < FD_TOLERANCE,
        format!("10 seeds, {tensors} tensors, worst relative error {:.2e} at {}", worst.0, worst.1),
    )
}

fn conv_oracles() -> Outcome {
    let c3 = common::conv3d_oracle_worst(50, 3);
    let c1 = common::conv1d_oracle_worst(50, 1);
    outcome(
        c3 <= 1e-12 && c1 <= 1e-12,
        format!("50 instances each, worst conv3d {c3:.2e}, conv1d {c1:.2e}"),
    )
}

fn fusion_dimensions() -> Outcome {
    let ds = synthetic(40, 10, 2.0, 7);
    let refs: Vec<&Sample> = ds.samples.iter().collect();
    let mut bad = Vec::new();
    for (scheme, expected) in [(FusionScheme::Concat, 939), (FusionScheme::HadamardConcat, 339)] {
        let config = ModelConfig::toy().with_fusion(scheme);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prep = Preprocessing::fit(&config, &refs, None, &mut rng).unwrap();
        let model = DeceptionModel::new(config, prep, &mut rng).unwrap();
        for s in &ds.samples {
            let z = model.fuse(&model.prepare(s).unwrap()).unwrap();
            if z.values.len() != expected {
                bad.push(format!("{} {scheme}: {}", s.id, z.values.len()));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{} samples: concat 939, hadamard+concat 339; {} mismatches {:?}", ds.samples.len(), bad.len(), bad),
    )
}

fn loss_anchor() -> Outcome {
    let uniform = cross_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    let uniform_d = cross_entropy(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
    let perfect = cross_entropy(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
    // The clamp only touches zero-probability entries of the prediction,
    // which are multiplied by zero targets.
    let clamped = cross_entropy(&[1.0, 0.0], &[1.0 - 1e-15, 1e-15]).unwrap();
    outcome(
        uniform == 1.0 && uniform_d == 1.0 && perfect == 0.0 && clamped.abs() < 1e-12,
        format!("uniform {uniform}, {uniform_d}; perfect {perfect}; near-perfect {clamped:.1e}"),
    )
}

fn split_integrity() -> Outcome {
    let ds = synthetic(121, 53, 1.0, 11);
    let mut failures = Vec::new();
    for seed in 0..100 {
        let plan = subject_kfold(&ds.samples, 10, seed).unwrap();
        let mut tested: BTreeMap<&str, usize> = BTreeMap::new();
        for fold in &plan.folds {
            let (train, test) = fold.split(&ds.samples);
            let overlap = train.iter().any(|t| test.iter().any(|s| s.subject == t.subject));
            if overlap || train.len() + test.len() != ds.samples.len() {
                failures.push(format!("seed {seed}: leaking fold"));
            }
            for s in test {
                *tested.entry(&s.id).or_default() += 1;
            }
        }
        if tested.len() != ds.samples.len() || tested.values().any(|&n| n != 1) {
            failures.push(format!("seed {seed}: samples not tested exactly once"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("100 seeds, 10 folds, 121 samples / 53 subjects; failures {failures:?}"),
    )
}

fn cv(ds: &Dataset, scheme: FusionScheme, train: &TrainConfig, k: usize) -> MetricsReport {
    run_cross_validation(ds, &ModelConfig::toy().with_fusion(scheme), train, k, 42, 1).expect("cross-validation runs")
}

fn chance_level() -> (Outcome, Duration) {
    let start = Instant::now();
    let ds = synthetic(240, 40, 0.0, 42);
    let train = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for scheme in [
        FusionScheme::Unimodal(Modality::Audio),
        FusionScheme::Concat,
        FusionScheme::HadamardConcat,
    ] {
        let r = cv(&ds, scheme, &train, 10);
        pass &= (0.40..=0.60).contains(&r.mean_auc);
        parts.push(format!("{} {:.4}", scheme.model_name(), r.mean_auc));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    (outcome(pass, format!("mean AUC {}", parts.join(", "))), elapsed)
}

fn planted_signal() -> (Outcome, Duration) {
    let start = Instant::now();
    let ds = synthetic(80, 20, 2.0, 42);
    let train = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for scheme in [FusionScheme::Concat, FusionScheme::HadamardConcat] {
        let r = cv(&ds, scheme, &train, 5);
        pass &= r.mean_auc >= 0.95 && r.mean_accuracy >= 0.90;
        parts.push(format!(
            "{} AUC {:.4} accuracy {:.4}",
            scheme.model_name(),
            r.mean_auc,
            r.mean_accuracy
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(600);
    (outcome(pass, format!("5-fold, {} epochs: {}", train.epochs, parts.join("; "))), elapsed)
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

struct RunBytes {
    dataset: BTreeMap<String, Vec<u8>>,
    history: String,
    artifact: Vec<u8>,
    report: String,
}

fn deterministic_run(jobs: usize) -> RunBytes {
    let spec = SyntheticSpec {
        samples: 24,
        subjects: 6,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap().dataset;
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(&ds, tmp.path()).unwrap();
    let config = ModelConfig {
        hidden: 32,
        ..ModelConfig::toy()
    };
    let tc = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let refs: Vec<&Sample> = ds.samples.iter().collect();
    let (model, history) = train(&refs, None, &config, &tc).unwrap();
    let artifact = artifact::to_bytes(&model, &serde_json::json!({"seed": tc.seed})).unwrap();
    let report = run_cross_validation(&ds, &config, &tc, 3, 42, jobs).unwrap().to_json();
    RunBytes {
        dataset: dir_bytes(tmp.path()),
        history: history.to_jsonl(),
        artifact,
        report,
    }
}

fn determinism() -> Outcome {
    let a = deterministic_run(1);
    let b = deterministic_run(1);
    let c = deterministic_run(2);
    let checks = [
        ("synthetic data", a.dataset == b.dataset),
        ("training history", a.history == b.history),
        ("model artifact", a.artifact == b.artifact),
        ("metrics report", a.report == b.report),
        ("report across jobs", a.report == c.report),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        failed.is_empty(),
        format!("{} dataset files, {} artifact bytes; differing: {failed:?}", a.dataset.len(), a.artifact.len()),
    )
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut with_ties = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        // Coarse score grid forces ties.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let mut deceptive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        deceptive[0] = true;
        deceptive[1] = false;
        let labels: Vec<Label> = deceptive
            .iter()
            .map(|&d| if d { Label::Deceptive } else { Label::Truthful })
            .collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        if roc_auc(&scores, &labels).unwrap() != common::pairwise_auc(&scores, &deceptive) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && with_ties > 0,
        format!("100 instances ({with_ties} with ties), {mismatches} inexact"),
    )
}

fn main() -> ExitCode {
    let timed = |f: fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        (o, start.elapsed())
    };
    let (mut grad, grad_time) = timed(gradients);
    if grad_time >= Duration::from_secs(60) {
        grad.pass = false;
    }
    let results: Vec<(&str, (Outcome, Duration))> = vec![
        ("gradient correctness", (grad, grad_time)),
        ("convolution oracle equivalence", timed(conv_oracles)),
        ("fusion dimensions", timed(fusion_dimensions)),
        ("loss anchor", timed(loss_anchor)),
        ("split integrity", timed(split_integrity)),
        ("chance-level control", chance_level()),
        ("planted-signal recovery", planted_signal()),
        ("determinism", timed(determinism)),
        ("AUC metric", timed(auc_oracle)),
    ];
    let mut failed = 0;
    for (name, (o, t)) in &results {
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name} [{:.1}s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
