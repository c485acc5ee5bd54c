mod common;

use mmdd_core::artifact;
use mmdd_core::data::{generate_synthetic, load_manifest, write_dataset, Sample, SyntheticSpec};
use mmdd_core::evaluation::{render_table, run_cross_validation, run_random_control, score, MetricsReport, TableMetric};
use mmdd_core::fusion::FusionScheme;
use mmdd_core::model::ModelConfig;
use mmdd_core::training::{train, TrainConfig};
use mmdd_core::Error;

fn small_config() -> ModelConfig {
    ModelConfig {
        hidden: 16,
        ..ModelConfig::toy()
    }
}

fn quick() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn conv_forward_matches_nested_loops() {
    assert!(common::conv3d_oracle_worst(20, 99) <= 1e-12);
    assert!(common::conv1d_oracle_worst(20, 98) <= 1e-12);
}

#[test]
fn manifest_round_trip_preserves_the_dataset() {
    let spec = SyntheticSpec {
        samples: 12,
        subjects: 4,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap().dataset;
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    let back = load_manifest(&manifest).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn saved_model_predicts_identically() {
    let ds = generate_synthetic(&SyntheticSpec {
        samples: 10,
        subjects: 5,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .dataset;
    let refs: Vec<&Sample> = ds.samples.iter().collect();
    let (model, _) = train(&refs, None, &small_config(), &quick()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    artifact::save(&path, &model, &serde_json::json!({"seed": 42})).unwrap();
    let loaded = artifact::load(&path).unwrap();
    assert_eq!(loaded.metadata["seed"], 42);
    let a = score(&model, &refs).unwrap();
    let b = score(&loaded.model, &refs).unwrap();
    assert_eq!(a.scores, b.scores);
    assert_eq!(a.predictions, b.predictions);
}

#[test]
fn too_many_folds_fail_before_training() {
    let ds = generate_synthetic(&SyntheticSpec {
        samples: 8,
        subjects: 3,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .dataset;
    let err = run_cross_validation(&ds, &small_config(), &quick(), 4, 42, 1).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument { .. }), "{err}");
    assert!(err.to_string().contains('3'), "{err}");
}

#[test]
fn reports_round_trip_and_render() {
    let ds = generate_synthetic(&SyntheticSpec {
        samples: 12,
        subjects: 4,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .dataset;
    let mut reports = Vec::new();
    for scheme in [FusionScheme::Concat, FusionScheme::HadamardConcat] {
        let cfg = small_config().with_fusion(scheme);
        let r = run_cross_validation(&ds, &cfg, &quick(), 2, 42, 1).unwrap();
        assert_eq!(r.folds.len(), 2);
        assert_eq!(r.folds.iter().map(|f| f.test_samples).sum::<usize>(), 12);
        assert_eq!(MetricsReport::from_json(&r.to_json()).unwrap(), r);
        reports.push(r);
    }
    reports.push(run_random_control(&ds, &small_config(), &quick(), 2, 42, 1).unwrap());
    let table = render_table(&reports, TableMetric::Auc);
    assert!(table.contains("MLP_H+C") && table.contains("Random"), "{table}");
}
