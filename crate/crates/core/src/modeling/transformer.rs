//! Small transformer encoder backend supporting both masked-language-model
//! pretraining and classification fine-tuning.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{Encoder, EncoderShape};
use super::masking::MaskedSequence;
use super::optim::AdamW;
use super::text::{word_tokens, Vocab};
use super::{read_json, write_json, Capabilities, ClassifierModel, EncoderBackend, MLMConfig, MlmModel, ModelError, TrainConfig};
use crate::corpus::AttachmentLabel;

pub const NAME: &str = "tiny-transformer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    /// Maximum sequence length in tokens; longer inputs are truncated.
    pub max_len: usize,
    pub max_vocab: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            d_model: 32,
            n_heads: 2,
            n_layers: 1,
            d_ff: 64,
            max_len: 64,
            max_vocab: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransformerBackend {
    cfg: TransformerConfig,
}

impl TransformerBackend {
    pub fn new(cfg: TransformerConfig) -> Self {
        TransformerBackend { cfg }
    }

    fn fresh(&self, vocab: Vocab, seed: u64) -> Result<Encoder, ModelError> {
        let c = &self.cfg;
        if c.n_heads == 0 || c.d_model % c.n_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                c.d_model, c.n_heads
            )));
        }
        let shape = EncoderShape {
            d_model: c.d_model,
            n_heads: c.n_heads,
            n_layers: c.n_layers,
            d_ff: c.d_ff,
            max_len: c.max_len,
            vocab_size: vocab.len(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Encoder::new(shape, &mut rng))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EncoderFile {
    shape: EncoderShape,
    vocab: Vocab,
    params: Vec<f64>,
}

fn save_encoder(vocab: &Vocab, enc: &Encoder, path: &Path) -> Result<(), ModelError> {
    write_json(
        &EncoderFile {
            shape: enc.shape,
            vocab: vocab.clone(),
            params: enc.params.clone(),
        },
        path,
    )
}

fn load_encoder(path: &Path) -> Result<(Vocab, Encoder), ModelError> {
    let f: EncoderFile = read_json(path)?;
    let vocab = f.vocab.reindex();
    if vocab.len() != f.shape.vocab_size {
        return Err(ModelError::backend(NAME, "vocabulary size does not match encoder shape"));
    }
    let enc = Encoder::from_params(f.shape, f.params)
        .ok_or_else(|| ModelError::backend(NAME, "parameter count does not match encoder shape"))?;
    Ok((vocab, enc))
}

struct TransformerClassifier {
    vocab: Vocab,
    encoder: Encoder,
    opt: Option<AdamW>,
}

impl ClassifierModel for TransformerClassifier {
    fn train_batch(&mut self, batch: &[(&[String], AttachmentLabel)]) -> Result<f64, ModelError> {
        let mut grad = vec![0.0; self.encoder.num_params()];
        let w = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (tokens, label) in batch {
            let ids = self.vocab.encode(tokens);
            loss += w * self.encoder.classify_loss_grad(&ids, label.index(), w, &mut grad);
        }
        let opt = self
            .opt
            .as_mut()
            .ok_or_else(|| ModelError::backend(NAME, "model was loaded for inference only"))?;
        opt.step(&mut self.encoder.params, &mut grad);
        Ok(loss)
    }

    fn predict_proba(&self, tokens: &[String]) -> [f64; 3] {
        self.encoder.classify(&self.vocab.encode(tokens))
    }

    fn save(&self, path: &Path) -> Result<(), ModelError> {
        save_encoder(&self.vocab, &self.encoder, path)
    }
}

struct TransformerMlm {
    vocab: Vocab,
    encoder: Encoder,
    opt: AdamW,
}

impl MlmModel for TransformerMlm {
    fn encode(&self, tokens: &[String]) -> Vec<u32> {
        self.vocab.encode(tokens)
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn train_batch(&mut self, batch: &[MaskedSequence]) -> Result<f64, ModelError> {
        let masked: usize = batch.iter().map(MaskedSequence::masked_count).sum();
        if masked == 0 {
            return Ok(0.0);
        }
        let w = 1.0 / masked as f64;
        let mut grad = vec![0.0; self.encoder.num_params()];
        let mut total = 0.0;
        for seq in batch {
            total += self.encoder.mlm_loss_grad(seq, w, &mut grad).0;
        }
        self.opt.step(&mut self.encoder.params, &mut grad);
        Ok(total * w)
    }

    fn masked_loss(&self, seq: &MaskedSequence) -> (f64, usize) {
        self.encoder.mlm_loss(seq)
    }

    fn save(&self, path: &Path) -> Result<(), ModelError> {
        save_encoder(&self.vocab, &self.encoder, path)
    }
}

impl EncoderBackend for TransformerBackend {
    fn name(&self) -> &str {
        NAME
    }

    fn max_sequence_length(&self) -> usize {
        self.cfg.max_len
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            classify_finetune: true,
            mlm_pretrain: true,
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
        let (vocab, encoder) = match init {
            Some(path) => {
                let (vocab, pretrained) = load_encoder(path)?;
                let mut enc = self.fresh(vocab.clone(), cfg.seed)?;
                if !enc.load_body_from(&pretrained) {
                    return Err(ModelError::backend(
                        NAME,
                        "pretrained encoder shape differs from the backend configuration",
                    ));
                }
                (vocab, enc)
            }
            None => {
                let vocab = Vocab::build(train.iter().map(|t| t.as_slice()), self.cfg.max_vocab);
                let enc = self.fresh(vocab.clone(), cfg.seed)?;
                (vocab, enc)
            }
        };
        let opt = AdamW::new(encoder.num_params(), cfg.learning_rate, cfg.optimizer);
        Ok(Box::new(TransformerClassifier {
            vocab,
            encoder,
            opt: Some(opt),
        }))
    }

    fn load_classifier(&self, path: &Path) -> Result<Box<dyn ClassifierModel>, ModelError> {
        let (vocab, encoder) = load_encoder(path)?;
        Ok(Box::new(TransformerClassifier {
            vocab,
            encoder,
            opt: None,
        }))
    }

    fn new_mlm(&self, train: &[Vec<String>], cfg: &MLMConfig) -> Result<Box<dyn MlmModel>, ModelError> {
        let vocab = Vocab::build(train.iter().map(|t| t.as_slice()), self.cfg.max_vocab);
        let encoder = self.fresh(vocab.clone(), cfg.seed)?;
        let opt = AdamW::new(encoder.num_params(), cfg.learning_rate, cfg.optimizer);
        Ok(Box::new(TransformerMlm { vocab, encoder, opt }))
    }
}
