use std::path::Path;
use std::process::{Command, Output};

use attachclass::corpus::load_corpus;
use attachclass::instances::{build_corpus_instances, load_instances, MinLengthConfig};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attachclass"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{args:?} failed: {stderr}");
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn full_flow_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth_cfg = d.join("synth.json");
    std::fs::write(&synth_cfg, r#"{"seed": 3, "marker_strength": 1.0}"#).unwrap();
    let corpus = d.join("corpus.jsonl");
    ok(&["synth", "--config", p(&synth_cfg), "--out", p(&corpus)]);
    assert!(d.join("corpus.jsonl.manifest.json").exists());

    let stats = ok(&["stats", p(&corpus)]);
    assert!(stats.contains("documents (78)"), "{stats}");
    assert!(stats.contains("patient turns"));

    let inst = d.join("inst.jsonl");
    ok(&["segment", p(&corpus), "--min-length", "150", "--out", p(&inst)]);
    let c = load_corpus(&corpus, true).unwrap();
    let (expected, _) = build_corpus_instances(&c, MinLengthConfig::new(150)).unwrap();
    assert_eq!(load_instances(&inst).unwrap(), expected);

    let inst50 = d.join("inst50.jsonl");
    ok(&["segment", p(&corpus), "--min-length", "50", "--out", p(&inst50)]);
    let splits = d.join("splits.json");
    let out = ok(&["split", p(&corpus), "--seed", "4", "--k", "2", "--out", p(&splits)]);
    assert!(out.contains("test: {\"avoidant\": 3, \"preoccupied\": 5, \"secure\": 4}"), "{out}");

    let mut preds = Vec::new();
    for fold in ["0", "1"] {
        let run = d.join(format!("run/fold_{fold}"));
        ok(&[
            "train", "--instances", p(&inst50), "--splits", p(&splits), "--fold", fold, "--seed", "1",
            "--learning-rate", "0.001", "--epochs", "3", "--out-dir", p(&run),
        ]);
        assert!(run.join("manifest.json").exists());
        let pred = d.join(format!("pred_{fold}.jsonl"));
        ok(&["predict", "--checkpoint", p(&run), "--instances", p(&inst50), "--test-of", p(&splits), "--out", p(&pred)]);
        preds.push(pred);
    }
    let votes = d.join("votes.jsonl");
    let out = ok(&["vote", p(&preds[0]), p(&preds[1]), "--out", p(&votes)]);
    assert!(out.contains("over 2 models"));

    let metrics = d.join("metrics.json");
    let fig = d.join("cm.svg");
    let out = ok(&[
        "evaluate", "--gold", p(&inst50), "--pred", p(&votes), "--costs", "default", "--out", p(&metrics), "--plot",
        p(&fig),
    ]);
    assert!(out.contains("accuracy="));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!(m["accuracy"].as_f64().unwrap() >= 0.9, "{m}");
    assert!(m["cost_score"].is_number());
    assert!(m["macro_precision"].is_number() && m["macro_recall"].is_number());
    assert!(fig.exists());
}

#[test]
fn sweep_rerun_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = d.join("corpus.jsonl");
    ok(&["synth", "--seed", "8", "--marker-strength", "0.7", "--out", p(&corpus)]);
    let cfg = d.join("exp.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"corpus": {:?}, "min_lengths": [0, 50], "seed": 2, "split": {{"k": 3}}, "train": {{"epochs": 2}}, "output_dir": {:?}}}"#,
            p(&corpus),
            p(&d.join("a"))
        ),
    )
    .unwrap();
    let out = ok(&["sweep", "--config", p(&cfg), "--learning-rate", "0.001", "--jobs", "2"]);
    assert!(out.contains("min_length"), "{out}");
    let manifest = d.join("a/manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["config"]["train"]["learning_rate"], serde_json::json!(0.001));
    assert_eq!(m["config"]["train"]["batch_size"], serde_json::json!(16));

    let out = ok(&["sweep", "--manifest", p(&manifest), "--output-dir", p(&d.join("b"))]);
    assert!(out.contains("reproduced exactly"), "{out}");

    let figs = d.join("figs");
    ok(&["report", p(&d.join("a")), "--out-dir", p(&figs), "--corpus", p(&corpus)]);
    for f in ["sweep.svg", "confusion_min_0_vote.svg", "confusion_min_50_fold_2.svg", "turn_lengths.svg"] {
        assert!(figs.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(figs.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("min_length,fold,accuracy,mean,std,n_instances"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["segment", "x.jsonl"]).status.code(), Some(1));
    assert_eq!(cli(&["stats", p(&d.join("missing.jsonl"))]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));

    let bad = d.join("bad.jsonl");
    std::fs::write(&bad, "{\"doc_id\": \"a\", \"label\": \"secure\", \"turns\": [{\"speaker\": \"narrator\", \"text\": \"hi\"}]}\n").unwrap();
    let out = cli(&["stats", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("narrator"));

    let out = cli(&["synth", "--seed", "1", "--marker-strength", "2", "--out", p(&d.join("c.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(cli(&["synth", "--out", p(&d.join("c.jsonl"))]).status.code(), Some(1));

    let corpus = d.join("corpus.jsonl");
    ok(&["synth", "--seed", "1", "--out", p(&corpus)]);
    let out = cli(&["split", p(&corpus), "--seed", "1", "--test-count", "500", "--out", p(&d.join("s.json"))]);
    assert_eq!(out.status.code(), Some(1));

    // unwritable output location is a runtime failure
    let out = cli(&["segment", p(&corpus), "--min-length", "5", "--out", p(&d.join("no/such/dir/x.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
}
