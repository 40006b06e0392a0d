//! Encoder-agnostic classifier fine-tuning and masked-language-model
//! pretraining.
//!
//! Backends implement [`EncoderBackend`]; the training loops here own
//! batching, shuffling, truncation, per-epoch evaluation and checkpoint
//! selection so that every backend is driven identically.

pub mod encoder;
pub mod masking;
pub mod optim;
pub mod reference;
pub mod text;
pub mod transformer;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttachmentLabel, PerLabel};
use crate::instances::Instance;
use masking::{mask_tokens, MaskedSequence};
pub use optim::AdamWConfig;
pub use reference::{ReferenceBackend, ReferenceConfig};
pub use transformer::{TransformerBackend, TransformerConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("backend {backend} does not support {capability}")]
    Unsupported { backend: String, capability: &'static str },
    #[error("training set lacks label {label}")]
    MissingClassInTrain { label: AttachmentLabel },
    #[error("{0} set is empty")]
    EmptyData(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("backend {backend} failed: {message}")]
    BackendFailure { backend: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl ModelError {
    pub fn backend(backend: &str, message: impl Into<String>) -> Self {
        ModelError::BackendFailure {
            backend: backend.to_string(),
            message: message.into(),
        }
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ModelError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| ModelError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ModelError::Json {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub classify_finetune: bool,
    pub mlm_pretrain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_seq_length")]
    pub max_seq_length: usize,
    pub seed: u64,
    #[serde(default = "default_num_classes")]
    pub num_classes: usize,
    #[serde(default)]
    pub optimizer: AdamWConfig,
}

fn default_learning_rate() -> f64 {
    1e-5
}
fn default_epochs() -> usize {
    10
}
fn default_batch_size() -> usize {
    16
}
fn default_max_seq_length() -> usize {
    512
}
fn default_num_classes() -> usize {
    3
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            max_seq_length: default_max_seq_length(),
            seed,
            num_classes: default_num_classes(),
            optimizer: AdamWConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.max_seq_length == 0 {
            return Err(ModelError::InvalidConfig(
                "epochs, batch_size and max_seq_length must be positive".into(),
            ));
        }
        if self.num_classes != 3 {
            return Err(ModelError::InvalidConfig(format!(
                "num_classes must be 3, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLMConfig {
    #[serde(default = "default_mask_probability")]
    pub mask_probability: f64,
    #[serde(default = "default_duplication")]
    pub duplication_factor: usize,
    #[serde(default = "default_mlm_epochs")]
    pub epochs: usize,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_mlm_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: AdamWConfig,
}

fn default_mask_probability() -> f64 {
    0.15
}
fn default_duplication() -> usize {
    4
}
fn default_mlm_epochs() -> usize {
    20
}
fn default_holdout() -> f64 {
    0.20
}
fn default_mlm_learning_rate() -> f64 {
    1e-4
}

impl MLMConfig {
    pub fn new(seed: u64) -> Self {
        MLMConfig {
            mask_probability: default_mask_probability(),
            duplication_factor: default_duplication(),
            epochs: default_mlm_epochs(),
            holdout_fraction: default_holdout(),
            seed,
            learning_rate: default_mlm_learning_rate(),
            batch_size: default_batch_size(),
            optimizer: AdamWConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mask_probability > 0.0 && self.mask_probability < 1.0) {
            return Err(ModelError::InvalidConfig("mask_probability must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(ModelError::InvalidConfig("holdout_fraction must lie in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig(
                "epochs, batch_size and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A classifier being fine-tuned or loaded for inference.
pub trait ClassifierModel: Send {
    /// One optimizer step on a batch; returns the mean batch loss.
    fn train_batch(&mut self, batch: &[(&[String], AttachmentLabel)]) -> Result<f64, ModelError>;
    fn predict_proba(&self, tokens: &[String]) -> [f64; 3];
    fn save(&self, path: &Path) -> Result<(), ModelError>;
}

/// An encoder being trained on masked-token prediction.
pub trait MlmModel: Send {
    fn encode(&self, tokens: &[String]) -> Vec<u32>;
    fn vocab_size(&self) -> usize;
    fn train_batch(&mut self, batch: &[MaskedSequence]) -> Result<f64, ModelError>;
    /// Summed loss and masked-position count, without updating weights.
    fn masked_loss(&self, seq: &MaskedSequence) -> (f64, usize);
    fn save(&self, path: &Path) -> Result<(), ModelError>;
}

/// Pretrained-encoder interface. Tokenization must be deterministic.
pub trait EncoderBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Sequence limit in the backend's own token units.
    fn max_sequence_length(&self) -> usize;
    fn capabilities(&self) -> Capabilities;
    fn tokenize(&self, text: &str) -> Vec<String>;
    /// Fresh classifier, optionally initialized from a pretrained encoder
    /// saved by [`MlmModel::save`].
    fn new_classifier(
        &self,
        train: &[Vec<String>],
        cfg: &TrainConfig,
        init: Option<&Path>,
    ) -> Result<Box<dyn ClassifierModel>, ModelError>;
    fn load_classifier(&self, path: &Path) -> Result<Box<dyn ClassifierModel>, ModelError>;
    fn new_mlm(&self, train: &[Vec<String>], cfg: &MLMConfig) -> Result<Box<dyn MlmModel>, ModelError>;
}

/// Serializable backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BackendSpec {
    Reference(ReferenceConfig),
    TinyTransformer(TransformerConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Reference(ReferenceConfig::default())
    }
}

impl BackendSpec {
    pub fn from_name(name: &str) -> Result<Self, ModelError> {
        match name {
            "reference" => Ok(BackendSpec::Reference(ReferenceConfig::default())),
            "tiny-transformer" => Ok(BackendSpec::TinyTransformer(TransformerConfig::default())),
            other => Err(ModelError::InvalidConfig(format!(
                "unknown backend {other:?} (expected reference or tiny-transformer)"
            ))),
        }
    }

    pub fn build(&self) -> Box<dyn EncoderBackend> {
        match self {
            BackendSpec::Reference(c) => Box::new(ReferenceBackend::new(c.clone())),
            BackendSpec::TinyTransformer(c) => Box::new(TransformerBackend::new(c.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub backend: String,
    /// Weights file, relative to the checkpoint file's directory when saved.
    pub weights: PathBuf,
    pub config: serde_json::Value,
    /// `eval_accuracy` for classifiers, `holdout_perplexity` for MLM.
    pub metric_name: String,
    pub metric: f64,
    /// 1-based epoch at which the selected weights were saved.
    pub epoch: usize,
    pub curve: Vec<EpochRecord>,
    #[serde(default)]
    pub truncated_instances: usize,
}

impl ModelCheckpoint {
    pub const FILE: &'static str = "checkpoint.json";

    pub fn save(&self, dir: &Path) -> Result<PathBuf, ModelError> {
        let path = dir.join(Self::FILE);
        write_json(self, &path)?;
        Ok(path)
    }

    /// Loads a checkpoint file (or a directory containing one) and resolves
    /// the weights path.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let file = if path.is_dir() {
            path.join(Self::FILE)
        } else {
            path.to_path_buf()
        };
        let mut ckpt: ModelCheckpoint = read_json(&file)?;
        if ckpt.weights.is_relative() {
            let base = file.parent().unwrap_or(Path::new("."));
            ckpt.weights = base.join(&ckpt.weights);
        }
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    #[serde(rename = "probs")]
    pub probabilities: PerLabel<f64>,
    pub predicted: AttachmentLabel,
}

impl Prediction {
    /// Argmax with ties resolved by the fixed label order.
    pub fn from_probs(instance_id: impl Into<String>, probs: [f64; 3]) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        Prediction {
            instance_id: instance_id.into(),
            probabilities: PerLabel(probs),
            predicted: AttachmentLabel::ALL[best],
        }
    }
}

/// Tokenizes and truncates head-first to the effective sequence limit.
/// Returns the token lists and the number of truncated inputs.
pub fn tokenize_truncated(backend: &dyn EncoderBackend, texts: &[&str], limit: usize) -> (Vec<Vec<String>>, usize) {
    let limit = limit.min(backend.max_sequence_length());
    let mut truncated = 0;
    let tokens = texts
        .iter()
        .map(|t| {
            let mut toks = backend.tokenize(t);
            if toks.len() > limit {
                toks.truncate(limit);
                truncated += 1;
            }
            toks
        })
        .collect();
    (tokens, truncated)
}

fn accuracy(model: &dyn ClassifierModel, data: &[(Vec<String>, AttachmentLabel)]) -> f64 {
    let correct = data
        .iter()
        .filter(|(toks, label)| {
            Prediction::from_probs("", model.predict_proba(toks)).predicted == *label
        })
        .count();
    correct as f64 / data.len() as f64
}

/// Fine-tunes a 3-way classifier, keeping the weights of the epoch with the
/// best eval accuracy (earliest epoch on ties). Writes `model.json` and
/// `checkpoint.json` under `out_dir`.
pub fn train_classifier(
    backend: &dyn EncoderBackend,
    train: &[Instance],
    eval: &[Instance],
    cfg: &TrainConfig,
    init: Option<&Path>,
    out_dir: &Path,
) -> Result<ModelCheckpoint, ModelError> {
    cfg.validate()?;
    if !backend.capabilities().classify_finetune {
        return Err(ModelError::Unsupported {
            backend: backend.name().to_string(),
            capability: "classify_finetune",
        });
    }
    if train.is_empty() {
        return Err(ModelError::EmptyData("training"));
    }
    if eval.is_empty() {
        return Err(ModelError::EmptyData("eval"));
    }
    for label in AttachmentLabel::ALL {
        if !train.iter().any(|i| i.label == label) {
            return Err(ModelError::MissingClassInTrain { label });
        }
    }
    fs::create_dir_all(out_dir).map_err(|source| ModelError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    let prepare = |set: &[Instance]| {
        let texts: Vec<&str> = set.iter().map(|i| i.text.as_str()).collect();
        let (toks, truncated) = tokenize_truncated(backend, &texts, cfg.max_seq_length);
        let data: Vec<(Vec<String>, AttachmentLabel)> =
            toks.into_iter().zip(set.iter().map(|i| i.label)).collect();
        (data, truncated)
    };
    let (train_data, train_trunc) = prepare(train);
    let (eval_data, eval_trunc) = prepare(eval);

    let train_tokens: Vec<Vec<String>> = train_data.iter().map(|(t, _)| t.clone()).collect();
    let mut model = backend.new_classifier(&train_tokens, cfg, init)?;
    let weights = PathBuf::from("model.json");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[String], AttachmentLabel)> = chunk
                .iter()
                .map(|&i| (train_data[i].0.as_slice(), train_data[i].1))
                .collect();
            loss_sum += model.train_batch(&batch)?;
            batches += 1;
        }
        let acc = accuracy(model.as_ref(), &eval_data);
        curve.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            metric: acc,
        });
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((epoch, acc));
            model.save(&out_dir.join(&weights))?;
        }
    }
    let (epoch, metric) = best.expect("at least one epoch");
    let ckpt = ModelCheckpoint {
        backend: backend.name().to_string(),
        weights,
        config: serde_json::to_value(cfg).expect("config serializes"),
        metric_name: "eval_accuracy".into(),
        metric,
        epoch,
        curve,
        truncated_instances: train_trunc + eval_trunc,
    };
    ckpt.save(out_dir)?;
    Ok(ModelCheckpoint {
        weights: out_dir.join(&ckpt.weights),
        ..ckpt
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub instances: usize,
    pub truncated: usize,
}

/// One prediction per instance, in input order.
pub fn predict(
    backend: &dyn EncoderBackend,
    checkpoint: &ModelCheckpoint,
    instances: &[Instance],
) -> Result<(Vec<Prediction>, PredictReport), ModelError> {
    if checkpoint.backend != backend.name() {
        return Err(ModelError::backend(
            backend.name(),
            format!("checkpoint was trained with backend {}", checkpoint.backend),
        ));
    }
    if instances.is_empty() {
        return Ok((Vec::new(), PredictReport::default()));
    }
    let limit = checkpoint
        .config
        .get("max_seq_length")
        .and_then(|v| v.as_u64())
        .map(|v| v as usize)
        .unwrap_or_else(default_max_seq_length);
    let model = backend.load_classifier(&checkpoint.weights)?;
    let texts: Vec<&str> = instances.iter().map(|i| i.text.as_str()).collect();
    let (tokens, truncated) = tokenize_truncated(backend, &texts, limit);
    let preds = instances
        .iter()
        .zip(&tokens)
        .map(|(inst, toks)| Prediction::from_probs(inst.instance_id.clone(), model.predict_proba(toks)))
        .collect();
    Ok((
        preds,
        PredictReport {
            instances: instances.len(),
            truncated,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmData {
    /// Training texts, replicated `1 + duplication_factor` times.
    pub train: Vec<String>,
    pub holdout: Vec<String>,
}

/// Reserves `round(holdout_fraction * n)` texts for validation (seeded
/// draw) and replicates the rest `duplication_factor` additional times.
pub fn prepare_mlm_data(texts: &[String], cfg: &MLMConfig) -> Result<MlmData, ModelError> {
    if texts.is_empty() {
        return Err(ModelError::EmptyData("MLM text"));
    }
    let n_holdout = (cfg.holdout_fraction * texts.len() as f64).round() as usize;
    let mut idx: Vec<usize> = (0..texts.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    idx.shuffle(&mut rng);
    let mut held = vec![false; texts.len()];
    for &i in &idx[..n_holdout] {
        held[i] = true;
    }
    let holdout = texts.iter().zip(&held).filter(|(_, h)| **h).map(|(t, _)| t.clone()).collect();
    let unique: Vec<&String> = texts.iter().zip(&held).filter(|(_, h)| !**h).map(|(t, _)| t).collect();
    let mut train = Vec::with_capacity(unique.len() * (1 + cfg.duplication_factor));
    for _ in 0..=cfg.duplication_factor {
        train.extend(unique.iter().map(|t| (*t).clone()));
    }
    Ok(MlmData { train, holdout })
}

/// Continued masked-language-model training. Each epoch traverses the
/// (duplicated) training set once with fresh masks, then scores the holdout
/// set under a fixed mask; the epoch with the lowest holdout perplexity is
/// kept. Writes `encoder.json` and `checkpoint.json` under `out_dir`.
pub fn dapt_pretrain(
    backend: &dyn EncoderBackend,
    data: &MlmData,
    cfg: &MLMConfig,
    out_dir: &Path,
) -> Result<ModelCheckpoint, ModelError> {
    cfg.validate()?;
    if !backend.capabilities().mlm_pretrain {
        return Err(ModelError::Unsupported {
            backend: backend.name().to_string(),
            capability: "mlm_pretrain",
        });
    }
    if data.train.is_empty() {
        return Err(ModelError::EmptyData("MLM training"));
    }
    if data.holdout.is_empty() {
        return Err(ModelError::EmptyData("MLM holdout"));
    }
    fs::create_dir_all(out_dir).map_err(|source| ModelError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let limit = backend.max_sequence_length();
    let train_texts: Vec<&str> = data.train.iter().map(String::as_str).collect();
    let holdout_texts: Vec<&str> = data.holdout.iter().map(String::as_str).collect();
    let (train_tokens, _) = tokenize_truncated(backend, &train_texts, limit);
    let (holdout_tokens, _) = tokenize_truncated(backend, &holdout_texts, limit);

    let mut model = backend.new_mlm(&train_tokens, cfg)?;
    let train_ids: Vec<Vec<u32>> = train_tokens.iter().map(|t| model.encode(t)).collect();
    let vocab = model.vocab_size();
    let holdout_masked: Vec<MaskedSequence> = {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_401d);
        holdout_tokens
            .iter()
            .map(|t| mask_tokens(&model.encode(t), cfg.mask_probability, vocab, &mut rng))
            .collect()
    };

    let weights = PathBuf::from("encoder.json");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_ids.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<MaskedSequence> = chunk
                .iter()
                .map(|&i| mask_tokens(&train_ids[i], cfg.mask_probability, vocab, &mut rng))
                .collect();
            loss_sum += model.train_batch(&batch)?;
            batches += 1;
        }
        let (total, count) = holdout_masked
            .iter()
            .map(|s| model.masked_loss(s))
            .fold((0.0, 0usize), |(a, b), (l, c)| (a + l, b + c));
        let perplexity = if count == 0 { f64::INFINITY } else { (total / count as f64).exp() };
        curve.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            metric: perplexity,
        });
        if best.is_none_or(|(_, b)| perplexity < b) {
            best = Some((epoch, perplexity));
            model.save(&out_dir.join(&weights))?;
        }
    }
    let (epoch, metric) = best.expect("at least one epoch");
    let ckpt = ModelCheckpoint {
        backend: backend.name().to_string(),
        weights,
        config: serde_json::to_value(cfg).expect("config serializes"),
        metric_name: "holdout_perplexity".into(),
        metric,
        epoch,
        curve,
        truncated_instances: 0,
    };
    ckpt.save(out_dir)?;
    Ok(ModelCheckpoint {
        weights: out_dir.join(&ckpt.weights),
        ..ckpt
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_follow_label_order() {
        let p = Prediction::from_probs("x", [0.4, 0.4, 0.2]);
        assert_eq!(p.predicted, AttachmentLabel::Avoidant);
        let p = Prediction::from_probs("x", [0.2, 0.4, 0.4]);
        assert_eq!(p.predicted, AttachmentLabel::Secure);
        let p = Prediction::from_probs("x", [1.0 / 3.0; 3]);
        assert_eq!(p.predicted, AttachmentLabel::Avoidant);
    }

    #[test]
    fn prediction_json_shape() {
        let p = Prediction::from_probs("d:0", [0.1, 0.2, 0.7]);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["instance_id"], "d:0");
        assert_eq!(v["predicted"], "preoccupied");
        assert_eq!(v["probs"]["secure"], 0.2);
    }

    #[test]
    fn learning_rate_defaults_when_absent() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.learning_rate, 1e-5);
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.batch_size, 16);
        let mlm: MLMConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(mlm.mask_probability, 0.15);
        assert_eq!(mlm.duplication_factor, 4);
        assert_eq!(mlm.epochs, 20);
        assert_eq!(mlm.holdout_fraction, 0.2);
        assert!(serde_json::from_str::<TrainConfig>("{}").is_err(), "seed is mandatory");
    }

    #[test]
    fn mlm_data_counts() {
        let texts: Vec<String> = (0..100).map(|i| format!("text {i}")).collect();
        let data = prepare_mlm_data(&texts, &MLMConfig::new(1)).unwrap();
        assert_eq!(data.holdout.len(), 20);
        assert_eq!(data.train.len(), 400);
        for h in &data.holdout {
            assert!(!data.train.contains(h));
        }
        let mut cfg = MLMConfig::new(1);
        cfg.duplication_factor = 0;
        let plain = prepare_mlm_data(&texts, &cfg).unwrap();
        assert_eq!(plain.train.len(), 80);
        assert_eq!(plain.holdout, data.holdout);
        assert!(prepare_mlm_data(&[], &cfg).is_err());
    }

    #[test]
    fn backend_spec_json() {
        let spec: BackendSpec = serde_json::from_str(r#"{"name": "reference"}"#).unwrap();
        assert_eq!(spec, BackendSpec::from_name("reference").unwrap());
        let spec: BackendSpec = serde_json::from_str(r#"{"name": "tiny-transformer", "d_model": 16}"#).unwrap();
        match spec {
            BackendSpec::TinyTransformer(c) => assert_eq!(c.d_model, 16),
            _ => panic!(),
        }
        assert!(BackendSpec::from_name("roberta").is_err());
    }
}
