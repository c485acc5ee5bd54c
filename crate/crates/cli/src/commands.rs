use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mmdd_core::artifact;
use mmdd_core::data::{write_dataset, Dataset, Sample};
use mmdd_core::evaluation::{
    render_table, run_cross_validation, run_random_control, score, subject_kfold, MetricsReport, TableMetric,
};
use mmdd_core::model::DeceptionModel;
use mmdd_core::training;
use serde::Serialize;
use serde_json::json;

use crate::config::{config_error, RunConfig};
use crate::MetricArg;

pub const MODEL_FILE: &str = "model.bin";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const RANDOM_REPORT_FILE: &str = "random_report.json";
pub const TABLE_FILE: &str = "table.txt";

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn synth(c: &RunConfig) -> anyhow::Result<()> {
    let spec = c.synthetic_spec();
    let ds = mmdd_core::data::generate_synthetic(&spec)?.dataset;
    let out = c.out();
    create_dir(&out)?;
    let manifest = write_dataset(&ds, &out)?;
    let (truthful, deceptive) = ds.label_counts();
    println!(
        "wrote {} samples from {} subjects to {}",
        ds.samples.len(),
        ds.subjects().len(),
        manifest.display()
    );
    println!("labels: {truthful} truthful, {deceptive} deceptive");
    let mut per_subject: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in &ds.samples {
        let e = per_subject.entry(&s.subject).or_default();
        if s.label.is_deceptive() {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    for (subject, (t, d)) in per_subject {
        println!("  {subject}: {t} truthful, {d} deceptive");
    }
    Ok(())
}

/// Training and test subjects of fold 0.
fn fixed_split<'a>(c: &RunConfig, ds: &'a Dataset) -> anyhow::Result<(Vec<&'a Sample>, Vec<&'a Sample>)> {
    let plan = subject_kfold(&ds.samples, c.k(), c.seed())?;
    Ok(plan.folds[0].split(&ds.samples))
}

#[derive(Debug, Serialize)]
struct SplitMetrics {
    dataset: String,
    model_name: String,
    fold: usize,
    k: usize,
    seed: u64,
    test_samples: usize,
    accuracy: f64,
    /// Absent when the held-out subjects cover only one class.
    auc: Option<f64>,
}

fn split_metrics(c: &RunConfig, ds: &Dataset, model: &DeceptionModel, test: &[&Sample]) -> anyhow::Result<SplitMetrics> {
    let scored = score(model, test)?;
    Ok(SplitMetrics {
        dataset: ds.name.clone(),
        model_name: model.scheme().model_name().to_string(),
        fold: 0,
        k: c.k(),
        seed: c.seed(),
        test_samples: test.len(),
        accuracy: scored.accuracy()?,
        auc: scored.auc().ok(),
    })
}

pub fn train(c: &RunConfig) -> anyhow::Result<()> {
    let ds = c.dataset()?;
    let model_config = c.model_config()?;
    let train_config = c.train_config();
    let (train_set, test_set) = fixed_split(c, &ds)?;
    log::info!("training on {} samples, holding out {}", train_set.len(), test_set.len());
    let (model, history) = training::train(&train_set, ds.embeddings.as_ref(), &model_config, &train_config)?;
    let metrics = split_metrics(c, &ds, &model, &test_set)?;

    let out = c.out();
    create_dir(&out)?;
    let metadata = json!({
        "seed": c.seed(),
        "k": c.k(),
        "fold": 0,
        "dataset": ds.name,
        "train": train_config,
        "test": metrics,
    });
    let model_path = out.join(MODEL_FILE);
    artifact::save(&model_path, &model, &metadata)?;
    write(&out.join(HISTORY_FILE), history.to_jsonl())?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    println!("saved {}", model_path.display());
    Ok(())
}

pub fn eval(c: &RunConfig, model_path: &Path) -> anyhow::Result<()> {
    let loaded = artifact::load(model_path)?;
    let trained = loaded.model.config();
    if let Some(requested) = c.model.fusion {
        if requested != trained.fusion {
            return Err(config_error(format!(
                "{} was trained with fusion `{}` but `{requested}` was requested",
                model_path.display(),
                trained.fusion
            )));
        }
    }
    if let Some(requested) = c.model.text_mode {
        if requested != trained.text_mode {
            return Err(config_error(format!(
                "{} was trained with text mode `{}` but `{requested}` was requested",
                model_path.display(),
                trained.text_mode
            )));
        }
    }
    for (key, expected) in [("seed", c.seed()), ("k", c.k() as u64)] {
        if let Some(stored) = loaded.metadata.get(key).and_then(|v| v.as_u64()) {
            if stored != expected {
                log::warn!("model was trained with {key} {stored}, evaluating a split with {key} {expected}");
            }
        }
    }
    let ds = c.dataset()?;
    let (_, test_set) = fixed_split(c, &ds)?;
    let metrics = split_metrics(c, &ds, &loaded.model, &test_set)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn tables(reports: &[MetricsReport], metric: MetricArg) -> String {
    match metric {
        MetricArg::Auc => render_table(reports, TableMetric::Auc),
        MetricArg::Accuracy => render_table(reports, TableMetric::Accuracy),
        MetricArg::Both => format!(
            "{}\n{}",
            render_table(reports, TableMetric::Auc),
            render_table(reports, TableMetric::Accuracy)
        ),
    }
}

pub fn crossval(c: &RunConfig, random_control: bool) -> anyhow::Result<()> {
    let ds = c.dataset()?;
    let model_config = c.model_config()?;
    let train_config = c.train_config();
    let out = c.out();
    create_dir(&out)?;
    let report = run_cross_validation(&ds, &model_config, &train_config, c.k(), c.seed(), c.jobs())?;
    write(&out.join(REPORT_FILE), report.to_json())?;
    let mut reports = vec![report];
    if random_control {
        let control = run_random_control(&ds, &model_config, &train_config, c.k(), c.seed(), c.jobs())?;
        write(&out.join(RANDOM_REPORT_FILE), control.to_json())?;
        reports.push(control);
    }
    let table = tables(&reports, MetricArg::Both);
    write(&out.join(TABLE_FILE), &table)?;
    print!("{table}");
    for r in &reports {
        println!(
            "{} {}: mean AUC {:.4}, mean accuracy {:.4} (pooled {:.4}, {:.4})",
            r.config.feature_set, r.config.model_name, r.mean_auc, r.mean_accuracy, r.pooled_auc, r.pooled_accuracy
        );
    }
    Ok(())
}

pub fn report(paths: &[PathBuf], metric: MetricArg) -> anyhow::Result<()> {
    let mut reports = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        reports.push(MetricsReport::from_json(&text).with_context(|| p.display().to_string())?);
    }
    print!("{}", tables(&reports, metric));
    Ok(())
}
