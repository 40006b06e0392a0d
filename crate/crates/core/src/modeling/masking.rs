//! Dynamic token masking for masked-language-model training.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::text::{MASK_ID, NUM_SPECIAL};

/// A token sequence after masking. `targets[i]` holds the original id at
/// every selected position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedSequence {
    pub input: Vec<u32>,
    pub targets: Vec<Option<u32>>,
}

impl MaskedSequence {
    pub fn masked_count(&self) -> usize {
        self.targets.iter().filter(|t| t.is_some()).count()
    }
}

/// Selects each non-special position independently with probability
/// `probability`. Selected positions become `[MASK]` 80% of the time, a
/// random vocabulary token 10% of the time, and stay unchanged otherwise.
pub fn mask_tokens<R: Rng>(ids: &[u32], probability: f64, vocab_size: usize, rng: &mut R) -> MaskedSequence {
    let mut input = ids.to_vec();
    let mut targets = vec![None; ids.len()];
    for (i, &id) in ids.iter().enumerate() {
        if id < NUM_SPECIAL && id != super::text::UNK_ID {
            continue;
        }
        if !rng.random_bool(probability) {
            continue;
        }
        targets[i] = Some(id);
        let roll: f64 = rng.random();
        if roll < 0.8 {
            input[i] = MASK_ID;
        } else if roll < 0.9 && vocab_size > NUM_SPECIAL as usize {
            input[i] = rng.random_range(NUM_SPECIAL..vocab_size as u32);
        }
    }
    MaskedSequence { input, targets }
}
