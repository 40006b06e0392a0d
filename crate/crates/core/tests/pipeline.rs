use std::path::Path;

use attachclass::corpus::{load_corpus, AttachmentLabel};
use attachclass::experiment::{rerun_manifest, run_experiment, ExperimentConfig};
use attachclass::manifest::RunManifest;
use attachclass::synthgen::{generate_corpus, SynthConfig};
use serde_json::json;

fn synth(dir: &Path, strength: f64, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("corpus_{strength}.jsonl"));
    generate_corpus(&SynthConfig::new(seed).with_marker_strength(strength))
        .unwrap()
        .save(&path)
        .unwrap();
    path
}

fn config(corpus: &Path, out: &Path, extra: serde_json::Value) -> ExperimentConfig {
    let mut v = json!({
        "corpus": corpus,
        "output_dir": out,
        "seed": 13,
        "min_lengths": [50],
    });
    for (k, val) in extra.as_object().unwrap() {
        v[k] = val.clone();
    }
    ExperimentConfig::from_value(v).unwrap()
}

#[test]
fn reference_backend_learns_markers() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 1.0, 21);
    let cfg = config(&corpus, &dir.path().join("run"), json!({"train": {"learning_rate": 0.001}}));
    let (out, _) = run_experiment(&cfg, 2).unwrap();
    let l = &out.lengths[0];
    println!("vote accuracy {:.4}", l.vote.accuracy);
    for f in &l.folds {
        println!("fold {} test accuracy {:.4} best epoch {}", f.fold, f.test.accuracy, f.best_epoch);
    }
    assert!(l.vote.accuracy >= 0.90);
}

#[test]
fn reference_backend_without_markers_is_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 0.0, 21);
    let cfg = config(&corpus, &dir.path().join("run"), json!({"train": {"learning_rate": 0.001}}));
    let (out, _) = run_experiment(&cfg, 2).unwrap();
    println!("vote accuracy {:.4}", out.lengths[0].vote.accuracy);
    assert!(out.lengths[0].vote.accuracy <= 0.45);
}

#[test]
fn layout_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 1.0, 5);
    let out_dir = dir.path().join("run");
    let cfg = config(
        &corpus,
        &out_dir,
        json!({"min_lengths": [0, 100], "train": {"epochs": 2}, "split": {"k": 3}}),
    );
    let (out, manifest) = run_experiment(&cfg, 1).unwrap();
    assert_eq!(out.sweep.entries.len(), 2);
    for m in [0, 100] {
        for i in 0..3 {
            let d = out_dir.join(format!("min_{m}/fold_{i}"));
            assert!(d.join("checkpoint.json").exists());
            assert!(d.join("model.json").exists());
            assert!(d.join("predictions.jsonl").exists());
        }
        assert!(out_dir.join(format!("min_{m}/votes.jsonl")).exists());
    }
    for f in ["manifest.json", "splits.json", "sweep.csv", "sweep.json", "sweep.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let loaded = RunManifest::load(&out_dir.join(RunManifest::FILE)).unwrap();
    assert_eq!(loaded, manifest);
    assert_eq!(loaded.config["train"]["learning_rate"], json!(1e-5));
    assert_eq!(loaded.config["train"]["seed"], json!(13));
    assert_eq!(loaded.backend.as_deref(), Some("reference"));
    assert!(loaded.inputs.contains_key("corpus"));
    assert_eq!(loaded.metric_curves["min_0/fold_2"].len(), 2);

    // a larger test set at min length 0 than at 100
    let docs = load_corpus(&corpus, true).unwrap();
    assert!(docs.labels().unwrap().values().any(|l| *l == AttachmentLabel::Secure));
    assert!(out.lengths[0].n_test_instances > out.lengths[1].n_test_instances);
}

#[test]
fn rerun_reproduces_and_detects_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 0.5, 9);
    let cfg = config(&corpus, &dir.path().join("a"), json!({"train": {"epochs": 3}}));
    let (_, manifest) = run_experiment(&cfg, 1).unwrap();
    let (fresh, same) = rerun_manifest(&manifest, &dir.path().join("b"), 3).unwrap();
    assert!(same);
    assert_eq!(fresh.metrics, manifest.metrics);
    assert_eq!(fresh.outputs["min_50/fold_0/predictions"].sha256, manifest.outputs["min_50/fold_0/predictions"].sha256);

    std::fs::write(&corpus, b"").unwrap();
    assert!(rerun_manifest(&manifest, &dir.path().join("c"), 1).is_err());
}
