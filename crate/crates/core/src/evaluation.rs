//! Subject-grouped cross-validation, accuracy, ROC-AUC and report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, Dataset, Label, Sample, SignalStrength, SyntheticSpec};
use crate::extractors::TextMode;
use crate::fusion::{FusionScheme, Modality};
use crate::model::{DeceptionModel, ModelConfig};
use crate::training::{train, TrainConfig};
use crate::{Error, Result};

/// Test subjects of one fold; every other subject trains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_subjects: BTreeSet<String>,
}

impl Fold {
    pub fn is_test(&self, sample: &Sample) -> bool {
        self.test_subjects.contains(&sample.subject)
    }

    pub fn split<'a>(&self, samples: &'a [Sample]) -> (Vec<&'a Sample>, Vec<&'a Sample>) {
        samples.iter().partition(|s| !self.is_test(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Shuffles the sorted distinct subjects with `seed` and deals them into `k`
/// groups whose sizes differ by at most one; fold `i` tests group `i`.
pub fn subject_kfold(samples: &[Sample], k: usize, seed: u64) -> Result<FoldPlan> {
    let mut subjects: Vec<&str> = samples
        .iter()
        .map(|s| s.subject.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if k < 2 {
        return Err(Error::invalid("subject_kfold", format!("k must be at least 2, got {k}")));
    }
    if subjects.len() < k {
        return Err(Error::invalid(
            "subject_kfold",
            format!("{} distinct subjects cannot fill {k} folds", subjects.len()),
        ));
    }
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (subjects.len() / k, subjects.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut rest = subjects.as_slice();
    for i in 0..k {
        let (group, tail) = rest.split_at(base + usize::from(i < extra));
        folds.push(Fold {
            test_subjects: group.iter().map(|s| s.to_string()).collect(),
        });
        rest = tail;
    }
    Ok(FoldPlan { k, seed, folds })
}

pub fn accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(Error::invalid(
            "accuracy",
            format!("{} predictions for {} labels", predictions.len(), labels.len()),
        ));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Mann–Whitney AUC: the fraction of (deceptive, truthful) pairs in which the
/// deceptive sample scores higher, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(
            "roc_auc",
            format!("{} scores for {} labels", scores.len(), labels.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("roc_auc", "NaN score"));
    }
    let n_pos = labels.iter().filter(|l| l.is_deceptive()).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("roc_auc", "AUC is undefined unless both classes are present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the U statistic, kept integral so the result is exact.
    let (mut twice_u, mut neg_below) = (0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]].is_deceptive() {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Table row label for a scheme and text mode.
pub fn feature_set(scheme: FusionScheme, text_mode: TextMode) -> &'static str {
    match (scheme, text_mode) {
        (FusionScheme::Unimodal(Modality::Audio), _) => "Audio",
        (FusionScheme::Unimodal(Modality::Visual), _) => "Visual",
        (FusionScheme::Unimodal(Modality::Text), TextMode::Static) => "Textual (Static)",
        (FusionScheme::Unimodal(Modality::Text), TextMode::NonStatic) => "Textual (Non-static)",
        (FusionScheme::Unimodal(Modality::Micro), _) => "Micro-Expression",
        (_, TextMode::Static) => "All Features (Static)",
        (_, TextMode::NonStatic) => "All Features (Non-static)",
    }
}

pub const RANDOM_ROW: &str = "Random";

/// Row order of the rendered tables.
pub const TABLE_ROWS: [&str; 8] = [
    RANDOM_ROW,
    "Audio",
    "Visual",
    "Textual (Static)",
    "Textual (Non-static)",
    "Micro-Expression",
    "All Features (Static)",
    "All Features (Non-static)",
];

pub const TABLE_COLUMNS: [&str; 3] = ["MLP_U", "MLP_C", "MLP_H+C"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub test_subjects: Vec<String>,
    pub test_samples: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub epochs_trained: usize,
    pub final_train_loss: f64,
    /// First epoch whose training accuracy reached 0.9.
    pub epochs_to_90: Option<usize>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub dataset: String,
    pub feature_set: String,
    pub model_name: String,
    pub k: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: RunEcho,
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub mean_auc: f64,
    /// Accuracy over all test predictions at once.
    pub pooled_accuracy: f64,
    /// AUC over all test scores at once.
    pub pooled_auc: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("metrics report: {e}")))
    }
}

/// Labels, predicted labels and scores of one evaluated split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scored {
    pub labels: Vec<Label>,
    pub predictions: Vec<Label>,
    pub scores: Vec<f64>,
}

impl Scored {
    pub fn accuracy(&self) -> Result<f64> {
        accuracy(&self.predictions, &self.labels)
    }

    pub fn auc(&self) -> Result<f64> {
        roc_auc(&self.scores, &self.labels)
    }
}

/// Scores `samples` with a trained model in evaluation mode.
pub fn score(model: &DeceptionModel, samples: &[&Sample]) -> Result<Scored> {
    let mut out = Scored::default();
    for s in samples {
        let p = model.predict(&model.prepare(s)?)?;
        out.labels.push(s.label);
        out.predictions.push(p.label);
        out.scores.push(p.score);
    }
    Ok(out)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

fn run_fold(
    dataset: &Dataset,
    fold_index: usize,
    fold: &Fold,
    model: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<(FoldMetrics, Scored)> {
    let (train_set, test_set) = fold.split(&dataset.samples);
    let config = TrainConfig {
        seed: train_config.seed.wrapping_add(fold_index as u64),
        ..train_config.clone()
    };
    let (trained, history) = train(&train_set, dataset.embeddings.as_ref(), model, &config)?;
    let scored = score(&trained, &test_set)?;
    let metrics = FoldMetrics {
        fold: fold_index,
        test_subjects: fold.test_subjects.iter().cloned().collect(),
        test_samples: test_set.len(),
        accuracy: scored.accuracy()?,
        auc: scored.auc()?,
        epochs_trained: history.epochs.len(),
        final_train_loss: history.final_loss().unwrap_or(f64::NAN),
        epochs_to_90: history.first_epoch_at_accuracy(0.9),
    };
    log::info!(
        "fold {fold_index}: accuracy {:.4}, AUC {:.4}",
        metrics.accuracy,
        metrics.auc
    );
    Ok((metrics, scored))
}

/// k-fold subject-wise cross-validation. Each fold fits its own
/// standardisation and word vectors on its training subjects and trains with
/// seed `train.seed + fold`; folds run on up to `jobs` threads and the report
/// is identical for any `jobs`.
pub fn run_cross_validation(
    dataset: &Dataset,
    model: &ModelConfig,
    train_config: &TrainConfig,
    k: usize,
    seed: u64,
    jobs: usize,
) -> Result<MetricsReport> {
    model.validate()?;
    train_config.validate()?;
    let plan = subject_kfold(&dataset.samples, k, seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("cross-validation", e.to_string()))?;
    let results: Vec<Result<(FoldMetrics, Scored)>> = pool.install(|| {
        plan.folds
            .par_iter()
            .enumerate()
            .map(|(i, fold)| {
                run_fold(dataset, i, fold, model, train_config).map_err(|e| Error::Fold {
                    fold: i,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let mut folds = Vec::with_capacity(k);
    let mut pooled = Scored::default();
    for r in results {
        let (m, s) = r?;
        folds.push(m);
        pooled.labels.extend(s.labels);
        pooled.predictions.extend(s.predictions);
        pooled.scores.extend(s.scores);
    }
    Ok(MetricsReport {
        config: RunEcho {
            dataset: dataset.name.clone(),
            feature_set: feature_set(model.fusion, model.text_mode).to_string(),
            model_name: model.fusion.model_name().to_string(),
            k,
            seed,
            model: model.clone(),
            train: train_config.clone(),
        },
        mean_accuracy: mean(folds.iter().map(|f| f.accuracy)),
        mean_auc: mean(folds.iter().map(|f| f.auc)),
        pooled_accuracy: pooled.accuracy()?,
        pooled_auc: pooled.auc()?,
        folds,
    })
}

/// A dataset of the same size, subjects, video geometry and embedding width
/// whose features carry no label information.
pub fn random_control_dataset(dataset: &Dataset, model: &ModelConfig, seed: u64) -> Result<Dataset> {
    let spec = SyntheticSpec {
        name: format!("{}-random", dataset.name),
        samples: dataset.samples.len(),
        subjects: dataset.subjects().len(),
        strength: SignalStrength::uniform(0.0),
        seed,
        video_shape: dataset.video_shape,
        embedding_dim: dataset
            .embeddings
            .as_ref()
            .map_or(model.embedding_dim, |e| e.dim()),
        ..SyntheticSpec::default()
    };
    Ok(generate_synthetic(&spec)?.dataset)
}

/// Cross-validation on [`random_control_dataset`]; the report's row is
/// "Random".
pub fn run_random_control(
    dataset: &Dataset,
    model: &ModelConfig,
    train_config: &TrainConfig,
    k: usize,
    seed: u64,
    jobs: usize,
) -> Result<MetricsReport> {
    let control = random_control_dataset(dataset, model, seed)?;
    let mut report = run_cross_validation(&control, model, train_config, k, seed, jobs)?;
    report.config.feature_set = RANDOM_ROW.to_string();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Auc,
    Accuracy,
}

/// Aligned plain-text table with one row per feature set and one column per
/// model. AUC is printed to four decimals, accuracy as a percentage; absent
/// cells show `-`. Later reports overwrite earlier ones in the same cell.
pub fn render_table(reports: &[MetricsReport], metric: TableMetric) -> String {
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in reports {
        let v = match metric {
            TableMetric::Auc => r.mean_auc,
            TableMetric::Accuracy => r.mean_accuracy,
        };
        cells.insert((r.config.feature_set.as_str(), r.config.model_name.as_str()), v);
    }
    let fmt = |v: f64| match metric {
        TableMetric::Auc => format!("{v:.4}"),
        TableMetric::Accuracy => format!("{:.2}%", 100.0 * v),
    };
    let label_width = TABLE_ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
    let col_width = 9;
    let mut out = String::new();
    let title = match metric {
        TableMetric::Auc => "AUC",
        TableMetric::Accuracy => "Accuracy",
    };
    write!(out, "{title:<label_width$}").unwrap();
    for c in TABLE_COLUMNS {
        write!(out, "  {c:>col_width$}").unwrap();
    }
    out.push('\n');
    for row in TABLE_ROWS {
        if !TABLE_COLUMNS.iter().any(|c| cells.contains_key(&(row, *c))) {
            continue;
        }
        write!(out, "{row:<label_width$}").unwrap();
        for c in TABLE_COLUMNS {
            let cell = cells.get(&(row, c)).map_or_else(|| "-".to_string(), |&v| fmt(v));
            write!(out, "  {cell:>col_width$}").unwrap();
        }
        out.push('\n');
    }
    out
}
