use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biteweight")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(seed: u64) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.json");
    fs::write(&cfg, r#"{"n_subjects": 2, "bouts_per_subject_per_food": 2}"#).unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--config", s(&cfg), "--out", s(&data), "--seed", &seed.to_string()]);
    dir
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_deterministic_per_seed() {
    let (a, b, c) = (small_dataset(5), small_dataset(5), small_dataset(6));
    let la = listing(&a.path().join("data"));
    assert_eq!(la.len(), 2 * 2 * 4);
    assert_eq!(la, listing(&b.path().join("data")));
    assert_ne!(la, listing(&c.path().join("data")));
}

#[test]
fn validate_reports_clean_and_broken_datasets() {
    let dir = small_dataset(1);
    let data = dir.path().join("data");
    ok(&["validate", "--data", s(&data)]);

    let json = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "json"))
        .unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let bouts = v.pointer_mut("/bouts").and_then(|b| b.as_array_mut()).unwrap();
    bouts[0]["weight_g"] = serde_json::json!(-2.0);
    fs::write(&json, serde_json::to_string(&v).unwrap()).unwrap();
    let out = run(&["validate", "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(1));
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("non-positive weight"), "{text}");
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(run(&["validate", "--data", s(&missing)]).status.code(), Some(2));
    assert_eq!(run(&["loso", "--data", s(&missing), "--out", s(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["features", "--set", "F9"]).status.code(), Some(2));
}

#[test]
fn loso_writes_every_output_and_report_rerenders_them() {
    let dir = small_dataset(2);
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"feature_sets": ["F1", "F4"], "estimators": ["LR", "GRNN"], "regimes": ["Apple", "All"], "k_max": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&[
        "loso", "--data", s(&dir.path().join("data")), "--config", s(&cfg), "--out", s(&out), "--seed", "3", "--jobs", "1",
    ]);
    let files = listing(&out);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names.len(), 7, "{names:?}");
    for f in ["report.json", "mae.csv", "mape.csv", "fig_all.svg"] {
        assert!(names.contains(&f), "{names:?}");
    }

    let again = dir.path().join("again");
    ok(&["report", "--in", s(&out.join("report.json")), "--out", s(&again)]);
    assert_eq!(listing(&again), files);
}

#[test]
fn train_writes_a_loadable_model() {
    let dir = small_dataset(3);
    let model = dir.path().join("model.json");
    ok(&[
        "train", "--data", s(&dir.path().join("data")), "--estimator", "GRNN", "--set", "F4", "--regime", "Apple",
        "--k-max", "3", "--out", s(&model),
    ]);
    let m: biteweight::harness::TrainedModel = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m.n_training_bouts, 4);
}

#[test]
fn features_writes_one_row_per_bout() {
    let dir = small_dataset(4);
    let (csv, desc) = (dir.path().join("f.csv"), dir.path().join("d.csv"));
    ok(&[
        "features", "--data", s(&dir.path().join("data")), "--set", "F3", "--k-max", "3", "--out", s(&csv),
        "--descriptors", s(&desc),
    ]);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 16 + 1);
    assert!(fs::read_to_string(&desc).unwrap().lines().count() > 16);
}
