use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use leafsight_core::imaging::encode_ppm;
use leafsight_core::synth::{checkered_leaf, fixture_corpus, write_corpus};

fn leafsight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leafsight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = leafsight(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// 3 diseased classes of 12 plus 24 healthy leaves.
fn corpus(root: &Path) {
    let mut classes = fixture_corpus(3, 12, 0, 64, 11);
    let healthy = (0..24).map(|i| checkered_leaf(64, 500 + i)).collect();
    classes.push(("Leaf___healthy".to_string(), healthy));
    write_corpus(root, &classes).unwrap();
}

fn common<'a>(root: &'a str, out: &'a str, cfg: &'a str) -> Vec<&'a str> {
    vec!["--root", root, "--out", out, "--config", cfg, "--seed", "7", "--jobs", "1"]
}

fn setup(dir: &Path) -> (String, String) {
    let root = dir.join("corpus");
    corpus(&root);
    let cfg = dir.join("leafsight.conf");
    fs::write(&cfg, "# small fixture\nbovw_k = 24\nrelieff_k = 5\n").unwrap();
    (root.display().to_string(), cfg.display().to_string())
}

#[test]
fn crossval_writes_reports_and_run_record() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, cfg) = setup(tmp.path());
    let out = tmp.path().join("out").display().to_string();
    let base = common(&root, &out, &cfg);
    ok(&[&["extract"], base.as_slice()].concat());
    ok(&[&["crossval", "--kernel", "linear", "--folds", "4"], base.as_slice()].concat());

    let folds = fs::read_to_string(tmp.path().join("out/crossval_folds.csv")).unwrap();
    assert!(folds.starts_with("fold,accuracy,macro_precision,macro_recall,macro_f1\n"));
    assert_eq!(folds.lines().count(), 1 + 4 + 2);
    let report = fs::read_to_string(tmp.path().join("out/crossval_report.csv")).unwrap();
    assert!(report.starts_with("class,precision,recall,f1,support\n"));

    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/run.json")).unwrap()).unwrap();
    let rec = &run["crossval"];
    assert_eq!(rec["seed"], 7);
    assert_eq!(rec["config"]["kernel"], "linear");
    assert_eq!(rec["config"]["cv_folds"], "4");
    assert_eq!(rec["config"]["bovw_k"], "24");
    assert!(run["extract"]["artifacts"][0]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn predict_routes_a_healthy_leaf_through_the_gate_only() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, cfg) = setup(tmp.path());
    let out = tmp.path().join("out").display().to_string();
    let base = common(&root, &out, &cfg);
    for cmd in ["extract", "train-gate", "train-disease"] {
        ok(&[&[cmd], base.as_slice()].concat());
    }
    let img = tmp.path().join("query.ppm");
    fs::write(&img, encode_ppm(&checkered_leaf(64, 9_999))).unwrap();
    let img = img.display().to_string();
    let pout = tmp.path().join("pred").display().to_string();
    fs::create_dir_all(&pout).unwrap();
    fs::copy(tmp.path().join("out/model.json"), tmp.path().join("pred/model.json")).unwrap();
    ok(&["predict", "--root", &img, "--out", &pout, "--config", &cfg]);
    let preds = fs::read_to_string(tmp.path().join("pred/predictions.csv")).unwrap();
    let row: Vec<&str> = preds.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "query");
    assert_eq!(row[2], "healthy");
    assert_eq!(row[5], "healthy");
    assert!(!tmp.path().join("pred/lesions").exists());
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, cfg) = setup(tmp.path());
    let mut stdout = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name).display().to_string();
        let base = common(&root, &out, &cfg);
        ok(&[&["extract"], base.as_slice()].concat());
        stdout.push(ok(&[&["train-disease", "--kernel", "quadratic"], base.as_slice()].concat()).stdout);
    }
    assert_eq!(stdout[0], stdout[1]);
    assert_eq!(
        fs::read(tmp.path().join("a/model.json")).unwrap(),
        fs::read(tmp.path().join("b/model.json")).unwrap()
    );
}

#[test]
fn missing_artifact_and_bad_config_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out").display().to_string();
    let r = leafsight(&["train-disease", "--out", &out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("extract"));

    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "gray_levels = 8\nno_such_key = 1\n").unwrap();
    let r = leafsight(&["segment", "--out", &out, "--config", &cfg.display().to_string()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));

    let r = leafsight(&["segment", "--out", &out, "--kernel", "sigmoid"]);
    assert!(!r.status.success());
}
