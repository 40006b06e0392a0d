//! Majority voting across fold models.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttachmentLabel, PerLabel};
use crate::modeling::Prediction;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("no models to vote over")]
    NoModels,
    #[error("model {model} disagrees on instance ids: {detail}")]
    InstanceSetMismatch { model: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub instance_id: String,
    pub votes: Vec<AttachmentLabel>,
    pub probability_sums: PerLabel<f64>,
    pub winner: AttachmentLabel,
    /// Two or more labels shared the top vote count.
    pub tie_broken: bool,
}

/// Per-label sums of per-model probabilities, added in ascending order so
/// the result does not depend on model order.
pub fn probability_sums<'a>(probs: impl IntoIterator<Item = &'a PerLabel<f64>>) -> PerLabel<f64> {
    let mut cols: PerLabel<Vec<f64>> = PerLabel::default();
    for p in probs {
        for l in AttachmentLabel::ALL {
            cols[l].push(p[l]);
        }
    }
    cols.map(|c| {
        let mut c = c.clone();
        c.sort_by(f64::total_cmp);
        c.into_iter().sum()
    })
}

/// Plurality winner; ties go to the largest summed probability, then to the
/// fixed label order.
pub fn decide(votes: &[AttachmentLabel], probability_sums: &PerLabel<f64>) -> (AttachmentLabel, bool) {
    let mut counts = PerLabel([0usize; 3]);
    for &v in votes {
        counts[v] += 1;
    }
    let top = *counts.0.iter().max().expect("three labels");
    let tied: Vec<AttachmentLabel> = AttachmentLabel::ALL
        .into_iter()
        .filter(|&l| counts[l] == top)
        .collect();
    if tied.len() == 1 {
        return (tied[0], false);
    }
    let mut winner = tied[0];
    for &l in &tied[1..] {
        if probability_sums[l] > probability_sums[winner] {
            winner = l;
        }
    }
    (winner, true)
}

/// Per-instance majority vote. Output follows the first model's order;
/// the other models may list the same instances in any order.
pub fn majority_vote(predictions_per_model: &[Vec<Prediction>]) -> Result<Vec<VoteRecord>, EnsembleError> {
    let first = predictions_per_model.first().ok_or(EnsembleError::NoModels)?;
    let ids: Vec<&str> = first.iter().map(|p| p.instance_id.as_str()).collect();
    let id_set: HashSet<&str> = ids.iter().copied().collect();
    if id_set.len() != ids.len() {
        return Err(EnsembleError::InstanceSetMismatch {
            model: 0,
            detail: "duplicate instance ids".into(),
        });
    }
    let mut lookups: Vec<HashMap<&str, &Prediction>> = Vec::with_capacity(predictions_per_model.len());
    for (m, preds) in predictions_per_model.iter().enumerate() {
        let map: HashMap<&str, &Prediction> = preds.iter().map(|p| (p.instance_id.as_str(), p)).collect();
        if map.len() != preds.len() {
            return Err(EnsembleError::InstanceSetMismatch {
                model: m,
                detail: "duplicate instance ids".into(),
            });
        }
        if map.len() != ids.len() || !ids.iter().all(|id| map.contains_key(id)) {
            let missing = ids.iter().find(|id| !map.contains_key(*id));
            let extra = map.keys().find(|id| !id_set.contains(*id));
            return Err(EnsembleError::InstanceSetMismatch {
                model: m,
                detail: format!("missing {missing:?}, unexpected {extra:?}"),
            });
        }
        lookups.push(map);
    }

    Ok(ids
        .iter()
        .map(|id| {
            let preds: Vec<&Prediction> = lookups.iter().map(|m| m[id]).collect();
            let votes: Vec<AttachmentLabel> = preds.iter().map(|p| p.predicted).collect();
            let probability_sums = probability_sums(preds.iter().map(|p| &p.probabilities));
            let (winner, tie_broken) = decide(&votes, &probability_sums);
            VoteRecord {
                instance_id: id.to_string(),
                votes,
                probability_sums,
                winner,
                tie_broken,
            }
        })
        .collect())
}

pub fn tie_count(records: &[VoteRecord]) -> usize {
    records.iter().filter(|r| r.tie_broken).count()
}
