//! Bag-of-words linear classifier. No pretraining; used to test the
//! pipeline independently of heavyweight encoders.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::AdamW;
use super::text::{word_tokens, Vocab};
use super::{read_json, write_json, Capabilities, ClassifierModel, EncoderBackend, MLMConfig, MlmModel, ModelError, TrainConfig};
use crate::corpus::AttachmentLabel;

pub const NAME: &str = "reference";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub max_sequence_length: usize,
    pub max_vocab: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            max_sequence_length: 512,
            max_vocab: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    cfg: ReferenceConfig,
}

impl ReferenceBackend {
    pub fn new(cfg: ReferenceConfig) -> Self {
        ReferenceBackend { cfg }
    }
}

impl Default for ReferenceBackend {
    fn default() -> Self {
        Self::new(ReferenceConfig::default())
    }
}

/// Weights are `vocab x 3` row-major followed by a 3-element bias.
#[derive(Debug, Serialize, Deserialize)]
struct LinearWeights {
    vocab: Vocab,
    params: Vec<f64>,
}

struct LinearModel {
    vocab: Vocab,
    params: Vec<f64>,
    opt: Option<AdamW>,
}

impl LinearModel {
    fn logits(&self, ids: &[u32]) -> [f64; 3] {
        let bias_off = self.vocab.len() * 3;
        let mut z = [self.params[bias_off], self.params[bias_off + 1], self.params[bias_off + 2]];
        for &id in ids {
            let row = &self.params[id as usize * 3..id as usize * 3 + 3];
            for c in 0..3 {
                z[c] += row[c];
            }
        }
        z
    }
}

fn softmax3(z: [f64; 3]) -> [f64; 3] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

impl ClassifierModel for LinearModel {
    fn train_batch(&mut self, batch: &[(&[String], AttachmentLabel)]) -> Result<f64, ModelError> {
        let mut grad = vec![0.0; self.params.len()];
        let bias_off = self.vocab.len() * 3;
        let w = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (tokens, label) in batch {
            let ids = self.vocab.encode(tokens);
            let mut d = softmax3(self.logits(&ids));
            loss -= d[label.index()].max(1e-300).ln() * w;
            d[label.index()] -= 1.0;
            for &id in &ids {
                for c in 0..3 {
                    grad[id as usize * 3 + c] += d[c] * w;
                }
            }
            for c in 0..3 {
                grad[bias_off + c] += d[c] * w;
            }
        }
        let opt = self
            .opt
            .as_mut()
            .ok_or_else(|| ModelError::backend(NAME, "model was loaded for inference only"))?;
        opt.step(&mut self.params, &mut grad);
        Ok(loss)
    }

    fn predict_proba(&self, tokens: &[String]) -> [f64; 3] {
        softmax3(self.logits(&self.vocab.encode(tokens)))
    }

    fn save(&self, path: &Path) -> Result<(), ModelError> {
        write_json(
            &LinearWeights {
                vocab: self.vocab.clone(),
                params: self.params.clone(),
            },
            path,
        )
    }
}

impl EncoderBackend for ReferenceBackend {
    fn name(&self) -> &str {
        NAME
    }

    fn max_sequence_length(&self) -> usize {
        self.cfg.max_sequence_length
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            classify_finetune: true,
            mlm_pretrain: false,
        }
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        word_tokens(text)
    }

    fn new_classifier(
        &self,
        train: &[Vec<String>],
        cfg: &TrainConfig,
        init: Option<&Path>,
    ) -> Result<Box<dyn ClassifierModel>, ModelError> {
        if init.is_some() {
            return Err(ModelError::Unsupported {
                backend: NAME.into(),
                capability: "pretrained initialization",
            });
        }
        let vocab = Vocab::build(train.iter().map(|t| t.as_slice()), self.cfg.max_vocab);
        let n = vocab.len() * 3 + 3;
        Ok(Box::new(LinearModel {
            vocab,
            params: vec![0.0; n],
            opt: Some(AdamW::new(n, cfg.learning_rate, cfg.optimizer)),
        }))
    }

    fn load_classifier(&self, path: &Path) -> Result<Box<dyn ClassifierModel>, ModelError> {
        let w: LinearWeights = read_json(path)?;
        let vocab = w.vocab.reindex();
        if w.params.len() != vocab.len() * 3 + 3 {
            return Err(ModelError::backend(NAME, "weight file does not match its vocabulary"));
        }
        Ok(Box::new(LinearModel {
            vocab,
            params: w.params,
            opt: None,
        }))
    }

    fn new_mlm(&self, _train: &[Vec<String>], _cfg: &MLMConfig) -> Result<Box<dyn MlmModel>, ModelError> {
        Err(ModelError::Unsupported {
            backend: NAME.into(),
            capability: "mlm_pretrain",
        })
    }
}
