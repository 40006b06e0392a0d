//! End-to-end experiment runs: split, segment, optional DAPT, k-fold
//! training, test-set prediction, majority vote and evaluation for every
//! minimum input length in a sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{extract_patient_turns, load_corpus, AttachmentLabel, ClassDistribution, Corpus, CorpusError};
use crate::ensemble::{majority_vote, tie_count, EnsembleError, VoteRecord};
use crate::evaluation::{
    confusion, cost_score, metrics, sweep_report, ConfusionMatrix, CostMatrix, EvalError, FoldResult, MetricReport,
    SweepReport, SweepRun,
};
use crate::instances::{build_corpus_instances, save_instances, Instance, InstanceError, MinLengthConfig};
use crate::manifest::{sha256_bytes, ManifestError, RunManifest};
use crate::modeling::{
    dapt_pretrain, predict, prepare_mlm_data, train_classifier, BackendSpec, EncoderBackend, EpochRecord, MLMConfig,
    ModelCheckpoint, ModelError, Prediction, TrainConfig,
};
use crate::splits::{
    check_no_leakage, make_folds, save_json, select_instances, stratified_split, FoldPlan, FoldStrategy, SplitError,
    SplitPlan,
};
use crate::synthgen::SynthError;

/// Environment variable naming a directory where pretrained encoders are
/// cached by content hash of their inputs.
pub const CACHE_ENV: &str = "ATTACHCLASS_CACHE";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Instances(#[from] InstanceError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("no test instances at minimum length {min_length}")]
    EmptyTestSet { min_length: usize },
    #[error("rerun diverged from manifest metrics")]
    NotReproduced,
}

impl PipelineError {
    /// True for bad user input (config, flags, malformed files) as opposed
    /// to failures while running.
    pub fn is_validation(&self) -> bool {
        use PipelineError::*;
        match self {
            InvalidConfig(_) | Json { .. } => true,
            Corpus(e) => !matches!(e, CorpusError::Io { .. }),
            Instances(e) => !matches!(e, InstanceError::Io { .. }),
            Split(e) => matches!(
                e,
                SplitError::TestCountTooLarge { .. } | SplitError::InvalidParameters(_) | SplitError::Json { .. }
            ),
            Model(e) => matches!(e, ModelError::InvalidConfig(_) | ModelError::Json { .. }),
            Synth(SynthError::InvalidConfig(_)) => true,
            Eval(e) => matches!(e, EvalError::DimensionMismatch { .. } | EvalError::InvalidCosts(_)),
            Manifest(ManifestError::Json { .. }) => true,
            _ => false,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
    #[serde(default)]
    pub strategy: FoldStrategy,
}

fn default_test_count() -> usize {
    12
}
fn default_k() -> usize {
    5
}
fn default_eval_fraction() -> f64 {
    0.2
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_count: default_test_count(),
            k: default_k(),
            eval_fraction: default_eval_fraction(),
            strategy: FoldStrategy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: PathBuf,
    #[serde(default = "default_min_lengths")]
    pub min_lengths: Vec<usize>,
    #[serde(default = "default_true")]
    pub keep_trailing_combined: bool,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub backend: BackendSpec,
    /// Fold `i` trains with seed `train.seed + i`.
    pub train: TrainConfig,
    /// Domain-adaptive pretraining before fine-tuning, when present.
    #[serde(default)]
    pub mlm: Option<MLMConfig>,
    /// Transcript JSONL whose turns (all speakers) feed pretraining. Without
    /// it, patient turns of the non-test documents are used.
    #[serde(default)]
    pub dapt_corpus: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub costs: CostMatrix,
}

fn default_min_lengths() -> Vec<usize> {
    vec![50]
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Parses a config object, filling `train.seed` and `mlm.seed` from the
    /// top-level seed when they are absent.
    pub fn from_value(mut v: Value) -> Result<Self, PipelineError> {
        let seed = v.get("seed").cloned();
        if let (Some(obj), Some(seed)) = (v.as_object_mut(), seed) {
            for key in ["train", "mlm"] {
                match obj.get_mut(key) {
                    Some(Value::Object(sub)) => {
                        sub.entry("seed").or_insert(seed.clone());
                    }
                    None if key == "train" => {
                        obj.insert(key.into(), serde_json::json!({ "seed": seed }));
                    }
                    _ => {}
                }
            }
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.min_lengths.is_empty() {
            return Err(PipelineError::InvalidConfig("min_lengths is empty".into()));
        }
        let mut sorted = self.min_lengths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.min_lengths.len() {
            return Err(PipelineError::InvalidConfig("min_lengths has duplicates".into()));
        }
        self.train.validate()?;
        if let Some(m) = &self.mlm {
            m.validate()?;
        }
        self.costs.validate()?;
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub eval_accuracy: f64,
    pub test: MetricReport,
    pub confusion: ConfusionMatrix,
    pub cost: f64,
    pub truncated: usize,
    pub curve: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthOutcome {
    pub min_length: usize,
    pub distribution: ClassDistribution,
    pub n_test_instances: usize,
    pub folds: Vec<FoldOutcome>,
    pub vote: MetricReport,
    pub vote_confusion: ConfusionMatrix,
    pub vote_cost: f64,
    pub vote_ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub lengths: Vec<LengthOutcome>,
    pub sweep: SweepReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dapt_perplexity: Option<f64>,
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), PipelineError> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("serializable record"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub(crate) fn write_pretty<T: Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn dapt_texts(cfg: &ExperimentConfig, corpus: &Corpus, plan: &SplitPlan) -> Result<Vec<String>, PipelineError> {
    Ok(match &cfg.dapt_corpus {
        Some(p) => load_corpus(p, false)?
            .documents
            .iter()
            .flat_map(|d| d.turns.iter().map(|t| t.text.clone()))
            .collect(),
        None => corpus
            .documents
            .iter()
            .filter(|d| plan.train_doc_ids.contains(&d.doc_id))
            .flat_map(|d| extract_patient_turns(d).into_iter().map(|t| t.text.clone()))
            .collect(),
    })
}

/// Runs (or reuses from the cache directory) domain-adaptive pretraining.
fn run_dapt(
    backend: &dyn EncoderBackend,
    spec: &BackendSpec,
    texts: &[String],
    mlm: &MLMConfig,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<ModelCheckpoint, PipelineError> {
    let mut key_src = serde_json::to_vec(&(spec, mlm)).expect("serializable");
    for t in texts {
        key_src.extend_from_slice(t.as_bytes());
        key_src.push(b'\n');
    }
    let key = sha256_bytes(&key_src);
    let dir = match std::env::var_os(CACHE_ENV) {
        Some(cache) if !cache.is_empty() => PathBuf::from(cache).join("dapt").join(&key),
        _ => out_dir.join("dapt"),
    };
    let ckpt = match ModelCheckpoint::load(&dir) {
        Ok(c) if c.weights.exists() => c,
        _ => {
            let data = prepare_mlm_data(texts, mlm)?;
            dapt_pretrain(backend, &data, mlm, &dir)?
        }
    };
    manifest.seeds.insert("mlm".into(), mlm.seed);
    manifest.metric_curves.insert("dapt".into(), ckpt.curve.clone());
    Ok(ckpt)
}

struct FoldJob {
    fold: usize,
    train: Vec<Instance>,
    eval: Vec<Instance>,
    dir: PathBuf,
}

fn run_fold(
    backend: &dyn EncoderBackend,
    spec: &BackendSpec,
    job: &FoldJob,
    test: &[Instance],
    base: &TrainConfig,
    init: Option<&Path>,
    costs: &CostMatrix,
) -> Result<(FoldOutcome, Vec<Prediction>), PipelineError> {
    let seed = base.seed.wrapping_add(job.fold as u64);
    let cfg = TrainConfig { seed, ..base.clone() };
    let ckpt = train_classifier(backend, &job.train, &job.eval, &cfg, init, &job.dir)?;
    save_backend_spec(spec, &job.dir)?;
    let (preds, report) = predict(backend, &ckpt, test)?;
    write_jsonl(&preds, &job.dir.join("predictions.jsonl"))?;
    let gold: Vec<AttachmentLabel> = test.iter().map(|i| i.label).collect();
    let pred: Vec<AttachmentLabel> = preds.iter().map(|p| p.predicted).collect();
    let cm = confusion(&gold, &pred)?;
    let outcome = FoldOutcome {
        fold: job.fold,
        seed,
        best_epoch: ckpt.epoch,
        eval_accuracy: ckpt.metric,
        test: metrics(&cm)?,
        confusion: cm,
        cost: cost_score(&cm, costs)?,
        truncated: ckpt.truncated_instances + report.truncated,
        curve: ckpt.curve,
    };
    Ok((outcome, preds))
}

/// Trains the folds on up to `jobs` threads. Results do not depend on
/// `jobs` because every fold has its own seed and output directory.
fn run_folds(
    backend: &dyn EncoderBackend,
    spec: &BackendSpec,
    jobs_list: &[FoldJob],
    test: &[Instance],
    base: &TrainConfig,
    init: Option<&Path>,
    costs: &CostMatrix,
    jobs: usize,
) -> Result<Vec<(FoldOutcome, Vec<Prediction>)>, PipelineError> {
    let results: Mutex<Vec<Option<Result<_, PipelineError>>>> =
        Mutex::new((0..jobs_list.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, jobs_list.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs_list.get(i) else { break };
                let r = run_fold(backend, spec, job, test, base, init, costs);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect()
}

/// Runs the whole experiment and writes its artifacts and `manifest.json`
/// under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<(ExperimentOutcome, RunManifest), PipelineError> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut manifest = RunManifest::new("sweep", cfg.to_value());
    manifest.add_input("corpus", &cfg.corpus)?;
    if let Some(p) = &cfg.dapt_corpus {
        manifest.add_input("dapt_corpus", p)?;
    }
    manifest.seeds.insert("split".into(), cfg.seed);
    manifest.seeds.insert("train".into(), cfg.train.seed);
    let backend = cfg.backend.build();
    manifest.backend = Some(backend.name().to_string());

    let corpus = load_corpus(&cfg.corpus, true)?;
    let plan = stratified_split(&corpus, cfg.split.test_count, cfg.seed)?;
    let folds = make_folds(
        &corpus,
        &plan,
        cfg.split.k,
        cfg.split.eval_fraction,
        cfg.seed,
        cfg.split.strategy,
    )?;
    check_no_leakage(&plan, &folds)?;
    let splits_path = out.join("splits.json");
    save_json(&SplitsFile { split: plan.clone(), folds: folds.clone() }, &splits_path)?;
    manifest.add_output("splits", &splits_path)?;

    let pretrained = match &cfg.mlm {
        Some(mlm) => {
            let texts = dapt_texts(cfg, &corpus, &plan)?;
            Some(run_dapt(backend.as_ref(), &cfg.backend, &texts, mlm, out, &mut manifest)?)
        }
        None => None,
    };

    let mut lengths = Vec::with_capacity(cfg.min_lengths.len());
    let mut runs = Vec::with_capacity(cfg.min_lengths.len());
    for &min_length in &cfg.min_lengths {
        let run_id = format!("min_{min_length}");
        let run_dir = out.join(&run_id);
        std::fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;
        let seg = MinLengthConfig {
            min_length,
            keep_trailing_combined: cfg.keep_trailing_combined,
        };
        let (instances, distribution) = build_corpus_instances(&corpus, seg)?;
        let inst_path = run_dir.join("instances.jsonl");
        save_instances(&instances, &inst_path)?;
        manifest.add_output(&format!("{run_id}/instances"), &inst_path)?;

        let test = select_instances(&instances, &plan.test_doc_ids);
        if test.is_empty() {
            return Err(PipelineError::EmptyTestSet { min_length });
        }
        let fold_jobs: Vec<FoldJob> = folds
            .folds
            .iter()
            .enumerate()
            .map(|(i, f)| FoldJob {
                fold: i,
                train: select_instances(&instances, &f.train_doc_ids),
                eval: select_instances(&instances, &f.eval_doc_ids),
                dir: run_dir.join(format!("fold_{i}")),
            })
            .collect();
        let results = run_folds(
            backend.as_ref(),
            &cfg.backend,
            &fold_jobs,
            &test,
            &cfg.train,
            pretrained.as_ref().map(|c| c.weights.as_path()),
            &cfg.costs,
            jobs,
        )?;
        let (fold_outcomes, fold_preds): (Vec<FoldOutcome>, Vec<Vec<Prediction>>) = results.into_iter().unzip();

        let votes: Vec<VoteRecord> = majority_vote(&fold_preds)?;
        write_jsonl(&votes, &run_dir.join("votes.jsonl"))?;
        let gold: Vec<AttachmentLabel> = test.iter().map(|i| i.label).collect();
        let voted: Vec<AttachmentLabel> = votes.iter().map(|v| v.winner).collect();
        let vote_confusion = confusion(&gold, &voted)?;
        let outcome = LengthOutcome {
            min_length,
            distribution: distribution.clone(),
            n_test_instances: test.len(),
            vote: metrics(&vote_confusion)?,
            vote_cost: cost_score(&vote_confusion, &cfg.costs)?,
            vote_confusion,
            vote_ties: tie_count(&votes),
            folds: fold_outcomes,
        };
        write_pretty(&outcome, &run_dir.join("metrics.json"))?;
        for f in &outcome.folds {
            manifest
                .metric_curves
                .insert(format!("{run_id}/fold_{}", f.fold), f.curve.clone());
            manifest.add_output(
                &format!("{run_id}/fold_{}/predictions", f.fold),
                &run_dir.join(format!("fold_{}", f.fold)).join("predictions.jsonl"),
            )?;
        }
        runs.push(SweepRun {
            min_length,
            folds: outcome
                .folds
                .iter()
                .map(|f| FoldResult {
                    fold: f.fold,
                    accuracy: f.test.accuracy,
                    n_instances: test.len(),
                })
                .collect(),
            distribution,
        });
        lengths.push(outcome);
    }

    let sweep = sweep_report(&runs)?;
    std::fs::write(out.join("sweep.csv"), sweep.to_csv()).map_err(io_err(out))?;
    std::fs::write(out.join("sweep.txt"), sweep.to_table()).map_err(io_err(out))?;
    write_pretty(&sweep, &out.join("sweep.json"))?;
    let outcome = ExperimentOutcome {
        lengths,
        sweep,
        dapt_perplexity: pretrained.map(|c| c.metric),
    };
    manifest.metrics = serde_json::to_value(&outcome).expect("outcome serializes");
    manifest.save(&out.join(RunManifest::FILE))?;
    Ok((outcome, manifest))
}

/// Re-runs a manifest's configuration into `output_dir` after checking its
/// inputs are unchanged. Returns the new manifest and whether its metrics
/// equal the recorded ones exactly.
pub fn rerun_manifest(
    manifest: &RunManifest,
    output_dir: &Path,
    jobs: usize,
) -> Result<(RunManifest, bool), PipelineError> {
    manifest.verify_inputs()?;
    let mut config = manifest.config.clone();
    if let Some(o) = config.as_object_mut() {
        o.insert("output_dir".into(), Value::String(output_dir.display().to_string()));
    }
    let cfg = ExperimentConfig::from_value(config)?;
    let (_, fresh) = run_experiment(&cfg, jobs)?;
    let same = fresh.metrics == manifest.metrics;
    Ok((fresh, same))
}

pub const BACKEND_FILE: &str = "backend.json";

/// Records the backend configuration next to a checkpoint.
pub fn save_backend_spec(spec: &BackendSpec, dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_pretty(spec, &dir.join(BACKEND_FILE))
}

/// Backend configuration stored beside a checkpoint, or the defaults for
/// the checkpoint's backend name when none was stored.
pub fn backend_for_checkpoint(ckpt_dir: &Path, ckpt: &ModelCheckpoint) -> Result<BackendSpec, PipelineError> {
    let path = ckpt_dir.join(BACKEND_FILE);
    if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })
    } else {
        Ok(BackendSpec::from_name(&ckpt.backend)?)
    }
}

/// Split plan plus folds, as written by `split` and read by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitsFile {
    pub split: SplitPlan,
    pub folds: FoldPlan,
}

/// Summary row per minimum length, keyed for quick lookup.
pub fn vote_accuracies(outcome: &ExperimentOutcome) -> BTreeMap<usize, f64> {
    outcome.lengths.iter().map(|l| (l.min_length, l.vote.accuracy)).collect()
}
