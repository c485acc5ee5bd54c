mod common;

use mmdd_core::extractors::TextMode;
use mmdd_core::fusion::{FusionScheme, Modality};
use mmdd_core::gradcheck::GradCheck;

fn assert_all_pass(checks: &[GradCheck]) {
    assert!(!checks.is_empty());
    for c in checks {
        assert!(c.passed(), "{} relative error {:.3e} over {} coords", c.name, c.rel_error, c.checked);
    }
}

#[test]
fn every_layer_matches_finite_differences() {
    for seed in 100..103 {
        assert_all_pass(&common::layer_checks(seed));
    }
}

#[test]
fn other_fusion_schemes_match_finite_differences() {
    for scheme in [
        FusionScheme::Concat,
        FusionScheme::Unimodal(Modality::Text),
        FusionScheme::Unimodal(Modality::Visual),
        FusionScheme::Unimodal(Modality::Micro),
    ] {
        assert_all_pass(&common::model_checks(7, scheme, TextMode::NonStatic, 8));
    }
}

#[test]
fn static_embeddings_are_not_checked_or_trained() {
    let checks = common::model_checks(9, FusionScheme::HadamardConcat, TextMode::Static, 8);
    assert!(checks.iter().all(|c| c.name != "text.embedding"));
    assert_all_pass(&checks);
}
