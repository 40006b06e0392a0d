mod args;

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use attachclass::corpus::{corpus_stats, load_corpus, turn_length_histogram, AttachmentLabel, StatsLevel};
use attachclass::ensemble::{majority_vote, tie_count};
use attachclass::evaluation::plots::{confusion_svg, histogram_svg, sweep_svg};
use attachclass::evaluation::{confusion, cost_score, metrics, ConfusionMatrix, CostMatrix, SweepReport};
use attachclass::experiment::{
    backend_for_checkpoint, rerun_manifest, run_experiment, save_backend_spec, ExperimentConfig, LengthOutcome,
    PipelineError, SplitsFile,
};
use attachclass::instances::{build_corpus_instances, load_instances, save_instances, MinLengthConfig};
use attachclass::manifest::RunManifest;
use attachclass::modeling::{
    dapt_pretrain, predict, prepare_mlm_data, train_classifier, BackendSpec, MLMConfig, ModelCheckpoint, Prediction,
    TrainConfig,
};
use attachclass::splits::{check_no_leakage, load_json, make_folds, save_json, select_instances, stratified_split, FoldStrategy};
use attachclass::synthgen::{generate_corpus, SynthConfig};

use args::*;

/// Bad flags or inputs; exits with status 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

trait Lib<T> {
    fn lib(self) -> Result<T>;
}

impl<T, E: Into<PipelineError>> Lib<T> for std::result::Result<T, E> {
    fn lib(self) -> Result<T> {
        self.map_err(|e| anyhow::Error::new(e.into()))
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return if p.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

fn run(argv: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Stats(a) => stats(a),
        Command::Segment(a) => segment(a),
        Command::Split(a) => split(a),
        Command::Dapt(a) => dapt(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Vote(a) => vote(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{} does not exist", path.display())))
    }
}

fn read_json_value(path: &Path) -> Result<Value> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn config_value(path: Option<&PathBuf>) -> Result<Value> {
    match path {
        Some(p) => {
            let v = read_json_value(p)?;
            if v.is_object() {
                Ok(v)
            } else {
                Err(usage(format!("{} must hold a JSON object", p.display())))
            }
        }
        None => Ok(json!({})),
    }
}

fn set<T: Serialize>(v: &mut Value, key: &str, value: Option<T>) {
    if let Some(x) = value {
        v[key] = serde_json::to_value(x).expect("serializable flag");
    }
}

fn parse_config<T: for<'de> serde::Deserialize<'de>>(v: Value, what: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| usage(format!("invalid {what} config: {e}")))
}

fn sidecar_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn backend_spec(a: &BackendArgs) -> Result<BackendSpec> {
    let mut v = match &a.backend_config {
        Some(p) => read_json_value(p)?,
        None => json!({}),
    };
    if let Some(name) = &a.backend {
        v["name"] = Value::String(name.clone());
    }
    if v.get("name").is_none() {
        v["name"] = json!("reference");
    }
    let name = v["name"].as_str().unwrap_or_default().to_string();
    BackendSpec::from_name(&name).lib()?;
    parse_config(v, "backend")
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut v = config_value(a.config.as_ref())?;
    set(&mut v, "seed", a.seed);
    set(&mut v, "marker_strength", a.marker_strength);
    if a.no_therapist {
        v["therapist_interleave"] = json!(false);
    }
    if v.get("seed").is_none() {
        return Err(usage("a seed is required (--seed or \"seed\" in the config)"));
    }
    let cfg: SynthConfig = parse_config(v, "synth")?;
    let corpus = generate_corpus(&cfg).lib()?;
    corpus.save(&a.out).lib()?;
    let mut m = RunManifest::new("synth", serde_json::to_value(&cfg)?);
    m.seeds.insert("synth".into(), cfg.seed);
    m.add_output("corpus", &a.out).lib()?;
    m.save(&sidecar_manifest(&a.out)).lib()?;
    let dist = corpus_stats(&corpus, StatsLevel::Document).lib()?;
    println!("wrote {} documents to {}", corpus.len(), a.out.display());
    println!("documents: {dist}");
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    require_exists(&a.corpus)?;
    let corpus = load_corpus(&a.corpus, true).lib()?;
    let docs = corpus_stats(&corpus, StatsLevel::Document).lib()?;
    let turns = corpus_stats(&corpus, StatsLevel::Turn).lib()?;
    let hist = turn_length_histogram(&corpus, &a.bins).lib()?;
    if let Some(p) = &a.plot {
        histogram_svg(&hist, p).lib()?;
    }
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({"documents": docs, "turns": turns, "histogram": hist}))?
        );
        return Ok(());
    }
    println!("documents ({}): {docs}", docs.total());
    println!("patient turns ({}): {turns}", turns.total());
    print!("{:>10}", "words");
    for l in AttachmentLabel::ALL {
        print!("  {:>11}", l.as_str());
    }
    println!();
    for i in 0..hist.boundaries.len() {
        print!("{:>10}", hist.bin_label(i));
        for l in AttachmentLabel::ALL {
            print!("  {:>11}", hist.counts[l][i]);
        }
        println!();
    }
    print!("{:>10}", "mean");
    for l in AttachmentLabel::ALL {
        print!("  {:>11.2}", hist.mean_length[l]);
    }
    println!();
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    require_exists(&a.corpus)?;
    let corpus = load_corpus(&a.corpus, true).lib()?;
    let cfg = MinLengthConfig {
        min_length: a.min_length,
        keep_trailing_combined: !a.drop_trailing,
    };
    let (instances, dist) = build_corpus_instances(&corpus, cfg).lib()?;
    save_instances(&instances, &a.out).lib()?;
    let mut m = RunManifest::new("segment", serde_json::to_value(cfg)?);
    m.add_input("corpus", &a.corpus).lib()?;
    m.add_output("instances", &a.out).lib()?;
    m.save(&sidecar_manifest(&a.out)).lib()?;
    println!("{} instances: {dist}", instances.len());
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    require_exists(&a.corpus)?;
    let corpus = load_corpus(&a.corpus, true).lib()?;
    let strategy = match a.strategy {
        Strategy::RepeatedHoldout => FoldStrategy::RepeatedHoldout,
        Strategy::Partition => FoldStrategy::Partition,
    };
    let plan = stratified_split(&corpus, a.test_count, a.seed).lib()?;
    let folds = make_folds(&corpus, &plan, a.k, a.eval_fraction, a.seed, strategy).lib()?;
    check_no_leakage(&plan, &folds).lib()?;
    let labels = corpus.labels().lib()?;
    let count = |ids: &BTreeSet<String>| {
        let mut c = BTreeMap::new();
        for id in ids {
            *c.entry(labels[id].as_str()).or_insert(0usize) += 1;
        }
        c
    };
    println!("test: {:?}", count(&plan.test_doc_ids));
    for (i, f) in folds.folds.iter().enumerate() {
        println!("fold {i}: train {:?} eval {:?}", count(&f.train_doc_ids), count(&f.eval_doc_ids));
    }
    save_json(&SplitsFile { split: plan, folds }, &a.out).lib()?;
    let mut m = RunManifest::new(
        "split",
        json!({"test_count": a.test_count, "k": a.k, "eval_fraction": a.eval_fraction, "strategy": strategy}),
    );
    m.seeds.insert("split".into(), a.seed);
    m.add_input("corpus", &a.corpus).lib()?;
    m.add_output("splits", &a.out).lib()?;
    m.save(&sidecar_manifest(&a.out)).lib()?;
    Ok(())
}

fn dapt(a: DaptArgs) -> Result<()> {
    require_exists(&a.texts)?;
    let mut v = config_value(a.config.as_ref())?;
    set(&mut v, "seed", a.seed);
    set(&mut v, "epochs", a.epochs);
    set(&mut v, "learning_rate", a.learning_rate);
    set(&mut v, "duplication_factor", a.duplication_factor);
    set(&mut v, "mask_probability", a.mask_probability);
    if v.get("seed").is_none() {
        return Err(usage("a seed is required (--seed or \"seed\" in the config)"));
    }
    let cfg: MLMConfig = parse_config(v, "MLM")?;
    cfg.validate().lib()?;
    let spec = backend_spec(&a.backend)?;
    let backend = spec.build();
    let corpus = load_corpus(&a.texts, false).lib()?;
    let texts: Vec<String> = corpus
        .documents
        .iter()
        .flat_map(|d| d.turns.iter().map(|t| t.text.clone()))
        .collect();
    let data = prepare_mlm_data(&texts, &cfg).lib()?;
    let ckpt = dapt_pretrain(backend.as_ref(), &data, &cfg, &a.out_dir).lib()?;
    save_backend_spec(&spec, &a.out_dir).lib()?;
    let mut m = RunManifest::new("dapt", json!({"mlm": cfg, "backend": spec}));
    m.backend = Some(backend.name().to_string());
    m.seeds.insert("mlm".into(), cfg.seed);
    m.add_input("texts", &a.texts).lib()?;
    m.add_output("encoder", &ckpt.weights).lib()?;
    m.metric_curves.insert("dapt".into(), ckpt.curve.clone());
    m.metrics = json!({"holdout_perplexity": ckpt.metric, "epoch": ckpt.epoch});
    m.save(&a.out_dir.join(RunManifest::FILE)).lib()?;
    println!(
        "{} train / {} holdout texts; best holdout perplexity {:.4} at epoch {}",
        data.train.len(),
        data.holdout.len(),
        ckpt.metric,
        ckpt.epoch
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    require_exists(&a.instances)?;
    require_exists(&a.splits)?;
    let mut v = config_value(a.config.as_ref())?;
    set(&mut v, "seed", a.seed);
    set(&mut v, "learning_rate", a.learning_rate);
    set(&mut v, "epochs", a.epochs);
    set(&mut v, "batch_size", a.batch_size);
    set(&mut v, "max_seq_length", a.max_seq_length);
    if v.get("seed").is_none() {
        return Err(usage("a seed is required (--seed or \"seed\" in the config)"));
    }
    let cfg: TrainConfig = parse_config(v, "training")?;
    cfg.validate().lib()?;
    let splits: SplitsFile = load_json(&a.splits).lib()?;
    let fold = splits
        .folds
        .folds
        .get(a.fold)
        .ok_or_else(|| usage(format!("fold {} out of range (k = {})", a.fold, splits.folds.folds.len())))?;
    let instances = load_instances(&a.instances).lib()?;
    let train_set = select_instances(&instances, &fold.train_doc_ids);
    let eval_set = select_instances(&instances, &fold.eval_doc_ids);
    let init = match &a.init {
        Some(p) => {
            require_exists(p)?;
            Some(ModelCheckpoint::load(p).lib()?.weights)
        }
        None => None,
    };
    let spec = backend_spec(&a.backend)?;
    let backend = spec.build();
    let ckpt = train_classifier(backend.as_ref(), &train_set, &eval_set, &cfg, init.as_deref(), &a.out_dir).lib()?;
    save_backend_spec(&spec, &a.out_dir).lib()?;
    let mut m = RunManifest::new("train", json!({"train": cfg, "backend": spec, "fold": a.fold}));
    m.backend = Some(backend.name().to_string());
    m.seeds.insert("train".into(), cfg.seed);
    m.add_input("instances", &a.instances).lib()?;
    m.add_input("splits", &a.splits).lib()?;
    if let Some(p) = &init {
        m.add_input("init", p).lib()?;
    }
    m.add_output("model", &ckpt.weights).lib()?;
    m.metric_curves.insert(format!("fold_{}", a.fold), ckpt.curve.clone());
    m.metrics = json!({"eval_accuracy": ckpt.metric, "epoch": ckpt.epoch, "truncated": ckpt.truncated_instances});
    m.save(&a.out_dir.join(RunManifest::FILE)).lib()?;
    println!(
        "fold {}: {} train / {} eval instances; best eval accuracy {:.4} at epoch {}",
        a.fold,
        train_set.len(),
        eval_set.len(),
        ckpt.metric,
        ckpt.epoch
    );
    if ckpt.truncated_instances > 0 {
        println!("{} instances truncated", ckpt.truncated_instances);
    }
    Ok(())
}

fn write_lines<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    require_exists(&a.checkpoint)?;
    require_exists(&a.instances)?;
    let ckpt = ModelCheckpoint::load(&a.checkpoint).lib()?;
    let dir = if a.checkpoint.is_dir() {
        a.checkpoint.clone()
    } else {
        a.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let spec = backend_for_checkpoint(&dir, &ckpt).lib()?;
    let backend = spec.build();
    let mut instances = load_instances(&a.instances).lib()?;
    if let Some(p) = &a.test_of {
        require_exists(p)?;
        let splits: SplitsFile = load_json(p).lib()?;
        instances = select_instances(&instances, &splits.split.test_doc_ids);
    }
    let (preds, report) = predict(backend.as_ref(), &ckpt, &instances).lib()?;
    write_lines(&preds, &a.out)?;
    println!("{} predictions written to {}", preds.len(), a.out.display());
    if report.truncated > 0 {
        println!("{} instances truncated", report.truncated);
    }
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    require_exists(path)?;
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction =
            serde_json::from_str(&line).map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

fn vote(a: VoteArgs) -> Result<()> {
    let per_model = a
        .predictions
        .iter()
        .map(|p| read_predictions(p))
        .collect::<Result<Vec<_>>>()?;
    let votes = majority_vote(&per_model).map_err(|e| usage(e.to_string()))?;
    write_lines(&votes, &a.out)?;
    println!(
        "{} instances voted over {} models; {} ties broken",
        votes.len(),
        per_model.len(),
        tie_count(&votes)
    );
    Ok(())
}

/// `instance_id` plus `predicted` (predictions) or `winner` (votes).
fn read_labels(path: &Path) -> Result<Vec<(String, AttachmentLabel)>> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| usage(format!("{}:{}: {m}", path.display(), i + 1));
        let v: Value = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let id = v["instance_id"].as_str().ok_or_else(|| bad("missing instance_id"))?;
        let label = v
            .get("predicted")
            .or_else(|| v.get("winner"))
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing predicted/winner"))?;
        let label: AttachmentLabel = label.parse().map_err(|e: String| bad(&e))?;
        out.push((id.to_string(), label));
    }
    Ok(out)
}

fn load_costs(spec: &str) -> Result<CostMatrix> {
    if spec == "default" {
        return Ok(CostMatrix::default());
    }
    let v = read_json_value(Path::new(spec))?;
    serde_json::from_value(v).map_err(|e| usage(format!("invalid cost matrix {spec}: {e}")))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    require_exists(&a.gold)?;
    let costs = load_costs(&a.costs)?;
    let gold: BTreeMap<String, AttachmentLabel> = load_instances(&a.gold)
        .lib()?
        .into_iter()
        .map(|i| (i.instance_id, i.label))
        .collect();
    let preds = read_labels(&a.pred)?;
    let mut g = Vec::with_capacity(preds.len());
    let mut p = Vec::with_capacity(preds.len());
    for (id, label) in &preds {
        let gl = gold
            .get(id)
            .ok_or_else(|| usage(format!("prediction for unknown instance {id}")))?;
        g.push(*gl);
        p.push(*label);
    }
    if preds.len() < gold.len() {
        eprintln!(
            "note: {} of {} gold instances have no prediction and are not scored",
            gold.len() - preds.len(),
            gold.len()
        );
    }
    let cm = confusion(&g, &p).map_err(|e| usage(e.to_string()))?;
    let report = metrics(&cm).lib()?;
    let cost = cost_score(&cm, &costs).lib()?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = json!({
        "n": report.n,
        "accuracy": report.accuracy,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "precision": report.precision,
        "recall": report.recall,
        "cost_score": cost,
        "costs": costs,
        "confusion": cm,
    });
    println!(
        "n={} accuracy={:.4} macro_precision={:.4} macro_recall={:.4} cost={:.4}",
        report.n, report.accuracy, report.macro_precision, report.macro_recall, cost
    );
    print_confusion(&cm);
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&out)? + "\n")?;
    }
    if let Some(path) = &a.plot {
        confusion_svg(&cm, "Confusion matrix", path).lib()?;
    }
    Ok(())
}

fn print_confusion(cm: &ConfusionMatrix) {
    println!("gold\\pred    avoidant  secure  preoccupied");
    for g in AttachmentLabel::ALL {
        println!(
            "{:<11}  {:>8}  {:>6}  {:>11}",
            g.as_str(),
            cm.get(g, AttachmentLabel::Avoidant),
            cm.get(g, AttachmentLabel::Secure),
            cm.get(g, AttachmentLabel::Preoccupied)
        );
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    if let Some(mpath) = &a.manifest {
        let manifest = RunManifest::load(mpath).lib()?;
        let out = a
            .output_dir
            .clone()
            .ok_or_else(|| usage("--output-dir is required with --manifest"))?;
        let (fresh, same) = rerun_manifest(&manifest, &out, a.jobs).lib()?;
        print_sweep(&fresh)?;
        if !same {
            return Err(anyhow::Error::new(PipelineError::NotReproduced));
        }
        println!("metrics reproduced exactly");
        return Ok(());
    }
    let mut v = config_value(a.config.as_ref())?;
    set(&mut v, "corpus", a.corpus);
    set(&mut v, "output_dir", a.output_dir);
    set(&mut v, "seed", a.seed);
    set(&mut v, "min_lengths", a.min_lengths);
    if let Some(name) = &a.backend {
        BackendSpec::from_name(name).lib()?;
        if v["backend"]["name"] != json!(name) {
            v["backend"] = json!({ "name": name });
        }
    }
    for (key, val) in [("learning_rate", a.learning_rate.map(|x| json!(x))), ("epochs", a.epochs.map(|x| json!(x)))] {
        if let Some(val) = val {
            if !v["train"].is_object() {
                v["train"] = json!({});
            }
            v["train"][key] = val;
        }
    }
    for key in ["corpus", "output_dir", "seed"] {
        if v.get(key).is_none() {
            return Err(usage(format!("{key} is required (flag or config field)")));
        }
    }
    let cfg = ExperimentConfig::from_value(v).lib()?;
    require_exists(&cfg.corpus)?;
    if let Some(p) = &cfg.dapt_corpus {
        require_exists(p)?;
    }
    let (_, manifest) = run_experiment(&cfg, a.jobs).lib()?;
    print_sweep(&manifest)?;
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}

fn print_sweep(m: &RunManifest) -> Result<()> {
    let sweep: SweepReport = serde_json::from_value(m.metrics["sweep"].clone())?;
    print!("{}", sweep.to_table());
    let lengths: Vec<LengthOutcome> = serde_json::from_value(m.metrics["lengths"].clone())?;
    for l in &lengths {
        println!(
            "min_length {}: vote accuracy {:.4}, macro P {:.4}, macro R {:.4}, cost {:.4}, ties {}",
            l.min_length, l.vote.accuracy, l.vote.macro_precision, l.vote.macro_recall, l.vote_cost, l.vote_ties
        );
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    require_exists(&a.run_dir)?;
    let out = a.out_dir.clone().unwrap_or_else(|| a.run_dir.clone());
    std::fs::create_dir_all(&out)?;
    let sweep: SweepReport = serde_json::from_value(read_json_value(&a.run_dir.join("sweep.json"))?)
        .map_err(|e| usage(format!("sweep.json: {e}")))?;
    sweep_svg(&sweep, &out.join("sweep.svg")).lib()?;
    std::fs::write(out.join("sweep.csv"), sweep.to_csv())?;
    print!("{}", sweep.to_table());
    let mut written = vec!["sweep.svg".to_string()];
    for e in &sweep.entries {
        let mpath = a.run_dir.join(format!("min_{}", e.min_length)).join("metrics.json");
        if !mpath.exists() {
            continue;
        }
        let l: LengthOutcome =
            serde_json::from_value(read_json_value(&mpath)?).map_err(|e| usage(format!("{}: {e}", mpath.display())))?;
        let name = format!("confusion_min_{}_vote.svg", l.min_length);
        confusion_svg(&l.vote_confusion, &format!("Majority vote, min length {}", l.min_length), &out.join(&name))
            .lib()?;
        written.push(name);
        for f in &l.folds {
            let name = format!("confusion_min_{}_fold_{}.svg", l.min_length, f.fold);
            confusion_svg(&f.confusion, &format!("Fold {}, min length {}", f.fold, l.min_length), &out.join(&name))
                .lib()?;
            written.push(name);
        }
    }
    if let Some(c) = &a.corpus {
        require_exists(c)?;
        let corpus = load_corpus(c, true).lib()?;
        let hist = turn_length_histogram(&corpus, &a.bins).lib()?;
        histogram_svg(&hist, &out.join("turn_lengths.svg")).lib()?;
        written.push("turn_lengths.svg".into());
    }
    println!("wrote {} figures to {}", written.len(), out.display());
    Ok(())
}
