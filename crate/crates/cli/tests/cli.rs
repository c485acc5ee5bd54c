use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mmdd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmdd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("mmdd runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stdout:\n{}\nstderr:\n{}", stdout(&o), stderr(&o));
    o
}

const CONFIG: &str = r#"
seed = 42
k = 4

[data.synthetic]
samples = 24
subjects = 8

[model]
preset = "toy"
hidden = 32

[train]
epochs = 3
"#;

#[test]
fn synth_writes_a_loadable_dataset_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(mmdd(dir.path(), &["synth", "--out", "a"]));
    assert!(stdout(&o).contains("20 truthful, 20 deceptive"), "{}", stdout(&o));
    let manifest = fs::read_to_string(dir.path().join("a/manifest.jsonl")).unwrap();
    let samples = manifest.lines().filter(|l| l.contains(r#""kind":"sample""#)).count();
    assert_eq!(samples, 40);

    ok(mmdd(dir.path(), &["synth", "--out", "b"]));
    for f in ["manifest.jsonl", "audio/s0003.csv", "video/s0003.bin", "micro/s0003.csv", "embeddings.txt"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    ok(mmdd(dir.path(), &["synth", "--out", "c", "--seed", "7"]));
    assert_ne!(
        fs::read(dir.path().join("a/audio/s0000.csv")).unwrap(),
        fs::read(dir.path().join("c/audio/s0000.csv")).unwrap()
    );
}

#[test]
fn train_then_eval_reproduces_test_metrics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let trained = ok(mmdd(dir.path(), &["train", "--config", "run.toml", "--out", "run"]));
    assert!(dir.path().join("run/model.bin").exists());
    assert_eq!(fs::read_to_string(dir.path().join("run/history.jsonl")).unwrap().lines().count(), 3);
    let metrics = stdout(&trained).split("saved").next().unwrap().to_string();

    let e1 = ok(mmdd(dir.path(), &["eval", "--config", "run.toml", "--out", "run"]));
    let e2 = ok(mmdd(dir.path(), &["eval", "--config", "run.toml", "--model", "run/model.bin"]));
    assert_eq!(stdout(&e1), metrics);
    assert_eq!(stdout(&e1), stdout(&e2));

    let bad = mmdd(dir.path(), &["eval", "--config", "run.toml", "--out", "run", "--modality", "micro"]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = stderr(&bad);
    assert!(msg.contains("hadamard_concat") && msg.contains("unimodal:micro"), "{msg}");
}

#[test]
fn crossval_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    let o = ok(mmdd(
        dir.path(),
        &["crossval", "--config", "run.toml", "--out", "cv", "--modality", "micro", "--random-control"],
    ));
    assert!(stdout(&o).contains("MLP_U"), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cv/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["model"]["fusion"], "unimodal:micro");
    assert_eq!(report["config"]["seed"], 42);
    assert_eq!(report["folds"].as_array().unwrap().len(), 4);
    let table = fs::read_to_string(dir.path().join("cv/table.txt")).unwrap();
    assert!(table.contains("Random"), "{table}");

    let r = ok(mmdd(dir.path(), &["report", "cv/report.json", "cv/random_report.json", "--metric", "auc"]));
    assert!(stdout(&r).starts_with("AUC"), "{}", stdout(&r));
    assert!(!stdout(&r).contains("Accuracy"));
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();

    let too_many_folds = mmdd(dir.path(), &["crossval", "--config", "run.toml", "--k", "9"]);
    assert_eq!(too_many_folds.status.code(), Some(2), "{}", stderr(&too_many_folds));
    assert!(!dir.path().join("report.json").exists());

    fs::write(dir.path().join("typo.toml"), "sede = 3\n").unwrap();
    assert_eq!(mmdd(dir.path(), &["train", "--config", "typo.toml"]).status.code(), Some(2));
    assert_eq!(mmdd(dir.path(), &["train", "--fusion", "sum"]).status.code(), Some(2));

    ok(mmdd(dir.path(), &["synth", "--out", "data", "--samples", "8", "--subjects", "4"]));
    let audio = dir.path().join("data/audio/s0002.csv");
    fs::write(&audio, "1.0,2.0\n").unwrap();
    let broken = mmdd(dir.path(), &["train", "--data", "data/manifest.jsonl", "--k", "2"]);
    assert_eq!(broken.status.code(), Some(3), "{}", stderr(&broken));
    assert!(stderr(&broken).contains("s0002"), "{}", stderr(&broken));

    fs::write(dir.path().join("blocker"), "").unwrap();
    let unwritable = mmdd(dir.path(), &["synth", "--out", "blocker/data"]);
    assert_eq!(unwritable.status.code(), Some(1));
    assert!(stderr(&unwritable).contains("blocker"), "{}", stderr(&unwritable));

    let missing = mmdd(dir.path(), &["eval", "--data", "data/manifest.jsonl", "--model", "nope.bin"]);
    assert_eq!(missing.status.code(), Some(3), "{}", stderr(&missing));
}

#[test]
fn divergent_training_exits_with_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        // Appended to the [train] table.
        format!("{CONFIG}learning_rate = 1e12\n"),
    )
    .unwrap();
    let o = mmdd(dir.path(), &["train", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite loss"), "{}", stderr(&o));
}
