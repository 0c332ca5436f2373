use std::fs;
use std::path::Path;

use leafsight_core::classify::KernelKind;
use leafsight_core::pipeline::{run, ModelDocument, PipelineConfig, RunOptions, RunRecord, Subcommand};
use leafsight_core::segmentation::BinaryMask;
use leafsight_core::synth::{checkered_leaf, fixture_corpus, write_corpus};
use leafsight_core::Error;

fn small_corpus(root: &Path) {
    let mut classes = fixture_corpus(3, 8, 0, 64, 5);
    let healthy = (0..8).map(|i| checkered_leaf(64, 700 + i)).collect();
    classes.push(("Leaf___healthy".to_string(), healthy));
    write_corpus(root, &classes).unwrap();
}

fn opts(root: &Path, out: &Path) -> RunOptions {
    let config = PipelineConfig {
        cv_folds: 4,
        bovw_k: 20,
        kernel: KernelKind::Linear,
        seed: 3,
        ..PipelineConfig::default()
    };
    RunOptions {
        root: Some(root.to_path_buf()),
        out: out.to_path_buf(),
        config,
        jobs: None,
    }
}

#[test]
fn subcommands_chain_and_record_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (root, out) = (tmp.path().join("corpus"), tmp.path().join("out"));
    small_corpus(&root);
    let o = opts(&root, &out);

    for cmd in Subcommand::ALL {
        run(cmd, &o).unwrap_or_else(|e| panic!("{cmd}: {e}"));
    }

    let leaf = fs::read(out.join("masks/Leaf___blight/Leaf___blight_000.leaf.pbm")).unwrap();
    assert!(BinaryMask::decode_pbm(&leaf).unwrap().count() > 0);
    assert!(out.join("masks/Leaf___healthy/Leaf___healthy_000.lesion.pbm").exists());

    let features = fs::read_to_string(out.join("features.csv")).unwrap();
    assert_eq!(features.lines().count(), 1 + 24);
    assert!(!features.contains("healthy"));

    assert!(fs::read_to_string(out.join("weights.csv")).unwrap().starts_with("feature,weight,rank\n"));
    assert!(fs::read_to_string(out.join("trace.csv")).unwrap().starts_with("step,feature,cv_accuracy\n"));

    let doc = ModelDocument::from_json(&fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(doc.classes.len(), 3);
    assert!(doc.gate.is_some());
    let selected = fs::read_to_string(out.join("selected.txt")).unwrap();
    assert_eq!(doc.selected_features, selected.lines().collect::<Vec<_>>());

    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert!(preds.starts_with("image,true_label,gate,gate_score,low_confidence,label\n"));
    assert_eq!(preds.lines().count(), 1 + 32);

    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("class,precision,recall,f1,support\n"));
    assert!(report.contains("\nhealthy,"));

    let runs: std::collections::BTreeMap<String, RunRecord> =
        serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(runs.len(), 8);
    let rec = &runs["train-disease"];
    assert_eq!(rec.seed, 3);
    assert!(rec.inputs.iter().any(|f| f.path == "features.csv"));
    let model_hash = &rec.artifacts.iter().find(|f| f.path == "model.json").unwrap().sha256;
    let bytes = fs::read(out.join("model.json")).unwrap();
    assert_eq!(*model_hash, leafsight_core::pipeline::sha256_hex(&bytes));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("corpus");
    small_corpus(&root);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let o = opts(&root, &tmp.path().join(name));
        for cmd in [Subcommand::Extract, Subcommand::TrainDisease, Subcommand::Crossval] {
            run(cmd, &o).unwrap();
        }
        outputs.push(
            ["features.csv", "model.json", "crossval_folds.csv"]
                .map(|f| fs::read(o.out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn missing_artifact_names_its_producer() {
    let tmp = tempfile::tempdir().unwrap();
    let o = opts(tmp.path(), &tmp.path().join("out"));
    match run(Subcommand::TrainDisease, &o) {
        Err(Error::MissingArtifact { producer, .. }) => assert_eq!(producer, "extract"),
        other => panic!("unexpected {other:?}"),
    }
    match run(Subcommand::Report, &o) {
        Err(Error::MissingArtifact { producer, .. }) => assert_eq!(producer, "predict"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unreadable_images_are_skipped_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("corpus");
    small_corpus(&root);
    fs::write(root.join("Leaf___blight/broken.ppm"), b"P6\n2 2\n255\n").unwrap();
    let o = opts(&root, &tmp.path().join("out"));
    let rec = run(Subcommand::Extract, &o).unwrap();
    assert!(rec.warnings.iter().any(|w| w.contains("broken.ppm")));
}
