//! Document-level stratified train/test splits and cross-validation folds.
//!
//! All assignment happens on documents, never on turns or instances, so no
//! text from one session can land on both sides of a split.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttachmentLabel, Corpus, CorpusError, PerLabel};
use crate::instances::Instance;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("test_count {requested} exceeds corpus size {available}")]
    TestCountTooLarge { requested: usize, available: usize },
    #[error("eval fraction {eval_fraction} of {train_docs} documents rounds to an empty eval set")]
    EvalSetEmpty { eval_fraction: f64, train_docs: usize },
    #[error("eval fraction {eval_fraction} of {train_docs} documents leaves no training documents")]
    TrainSetEmpty { eval_fraction: f64, train_docs: usize },
    #[error("invalid fold parameters: {0}")]
    InvalidParameters(String),
    #[error("document {doc_id:?} in the plan is not in the corpus")]
    UnknownDocument { doc_id: String },
    #[error("data leakage: {0}")]
    Leakage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed plan file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    #[serde(rename = "train")]
    pub train_doc_ids: BTreeSet<String>,
    #[serde(rename = "test")]
    pub test_doc_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    #[serde(rename = "train")]
    pub train_doc_ids: BTreeSet<String>,
    #[serde(rename = "eval")]
    pub eval_doc_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldStrategy {
    /// k independent stratified draws of `round(eval_fraction * n)` eval
    /// documents, sub-seeded with `seed + i`.
    #[default]
    RepeatedHoldout,
    /// Stratified k-way partition: every training document is evaluated
    /// exactly once; `eval_fraction` is ignored.
    Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub eval_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub strategy: FoldStrategy,
    pub folds: Vec<Fold>,
}

/// Splits `total` into per-label quotas proportional to `counts` using
/// largest-remainder rounding. Remainder ties go to the earlier label.
pub fn largest_remainder_quotas(counts: PerLabel<usize>, total: usize) -> PerLabel<usize> {
    let n: usize = counts.0.iter().sum();
    if n == 0 {
        return PerLabel([0; 3]);
    }
    // exact quota = total * count / n; work in integers to avoid float ties
    let mut quotas = counts.map(|&c| total * c / n);
    let remainders = counts.map(|&c| (total * c) % n);
    let assigned: usize = quotas.0.iter().sum();
    let mut order: Vec<AttachmentLabel> = AttachmentLabel::ALL.to_vec();
    // stable sort keeps fixed label order among equal remainders
    order.sort_by(|a, b| remainders[*b].cmp(&remainders[*a]));
    for label in order.into_iter().take(total - assigned) {
        quotas[label] += 1;
    }
    quotas
}

fn docs_by_label(
    labels: &BTreeMap<String, AttachmentLabel>,
    docs: impl IntoIterator<Item = String>,
) -> PerLabel<Vec<String>> {
    let mut by_label: PerLabel<Vec<String>> = PerLabel::default();
    for doc in docs {
        by_label[labels[&doc]].push(doc);
    }
    by_label
}

/// Draws `quotas[label]` documents per label uniformly without replacement.
fn stratified_draw(
    by_label: &PerLabel<Vec<String>>,
    quotas: PerLabel<usize>,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<String> {
    let mut drawn = BTreeSet::new();
    for label in AttachmentLabel::ALL {
        let mut pool = by_label[label].clone();
        pool.shuffle(rng);
        drawn.extend(pool.into_iter().take(quotas[label]));
    }
    drawn
}

pub fn stratified_split(c: &Corpus, test_count: usize, seed: u64) -> Result<SplitPlan, SplitError> {
    let labels = c.labels()?;
    if test_count > labels.len() {
        return Err(SplitError::TestCountTooLarge {
            requested: test_count,
            available: labels.len(),
        });
    }
    // corpus order, not map order, so the draw follows the file
    let by_label = docs_by_label(&labels, c.documents.iter().map(|d| d.doc_id.clone()));
    let quotas = largest_remainder_quotas(by_label.map(Vec::len), test_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test = stratified_draw(&by_label, quotas, &mut rng);
    let train = labels.keys().filter(|d| !test.contains(*d)).cloned().collect();
    Ok(SplitPlan {
        seed,
        train_doc_ids: train,
        test_doc_ids: test,
    })
}

/// Builds cross-validation folds over the plan's training documents. Labels
/// come from `c`, which must contain every planned document.
pub fn make_folds(
    c: &Corpus,
    plan: &SplitPlan,
    k: usize,
    eval_fraction: f64,
    seed: u64,
    strategy: FoldStrategy,
) -> Result<FoldPlan, SplitError> {
    if k == 0 {
        return Err(SplitError::InvalidParameters("k must be at least 1".into()));
    }
    if strategy == FoldStrategy::RepeatedHoldout && !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(SplitError::InvalidParameters(format!(
            "eval_fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    let labels = c.labels()?;
    if let Some(d) = plan.train_doc_ids.iter().find(|d| !labels.contains_key(*d)) {
        return Err(SplitError::UnknownDocument { doc_id: d.clone() });
    }
    let n = plan.train_doc_ids.len();
    let by_label = docs_by_label(&labels, plan.train_doc_ids.iter().cloned());

    let eval_sets: Vec<BTreeSet<String>> = match strategy {
        FoldStrategy::RepeatedHoldout => {
            let eval_size = (eval_fraction * n as f64).round() as usize;
            if eval_size == 0 {
                return Err(SplitError::EvalSetEmpty {
                    eval_fraction,
                    train_docs: n,
                });
            }
            if eval_size >= n {
                return Err(SplitError::TrainSetEmpty {
                    eval_fraction,
                    train_docs: n,
                });
            }
            let quotas = largest_remainder_quotas(by_label.map(Vec::len), eval_size);
            (0..k)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                    stratified_draw(&by_label, quotas, &mut rng)
                })
                .collect()
        }
        FoldStrategy::Partition => {
            if k > n || k < 2 {
                return Err(SplitError::InvalidParameters(format!(
                    "partition needs 2 <= k <= {n}, got {k}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sets = vec![BTreeSet::new(); k];
            let mut slot = 0usize;
            for label in AttachmentLabel::ALL {
                let mut pool = by_label[label].clone();
                pool.shuffle(&mut rng);
                for doc in pool {
                    sets[slot % k].insert(doc);
                    slot += 1;
                }
            }
            sets
        }
    };

    let folds = eval_sets
        .into_iter()
        .map(|eval| Fold {
            train_doc_ids: plan.train_doc_ids.difference(&eval).cloned().collect(),
            eval_doc_ids: eval,
        })
        .collect();
    Ok(FoldPlan {
        k,
        eval_fraction,
        seed,
        strategy,
        folds,
    })
}

/// Checks the leakage invariants of a split and its folds.
pub fn check_no_leakage(plan: &SplitPlan, folds: &FoldPlan) -> Result<(), SplitError> {
    if let Some(d) = plan.train_doc_ids.intersection(&plan.test_doc_ids).next() {
        return Err(SplitError::Leakage(format!("{d:?} is in both train and test")));
    }
    for (i, fold) in folds.folds.iter().enumerate() {
        if let Some(d) = fold.train_doc_ids.intersection(&fold.eval_doc_ids).next() {
            return Err(SplitError::Leakage(format!("fold {i}: {d:?} in train and eval")));
        }
        let union: BTreeSet<_> = fold.train_doc_ids.union(&fold.eval_doc_ids).cloned().collect();
        if union != plan.train_doc_ids {
            return Err(SplitError::Leakage(format!(
                "fold {i} does not cover exactly the training documents"
            )));
        }
    }
    Ok(())
}

pub fn select_instances(instances: &[Instance], docs: &BTreeSet<String>) -> Vec<Instance> {
    instances.iter().filter(|i| docs.contains(&i.doc_id)).cloned().collect()
}

/// Verifies that every instance comes from a document of `allowed`.
pub fn check_instances_within(instances: &[Instance], allowed: &BTreeSet<String>) -> Result<(), SplitError> {
    match instances.iter().find(|i| !allowed.contains(&i.doc_id)) {
        Some(i) => Err(SplitError::Leakage(format!(
            "instance {} comes from document {:?} outside the expected set",
            i.instance_id, i.doc_id
        ))),
        None => Ok(()),
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), SplitError> {
    let json = serde_json::to_string_pretty(value).map_err(|source| SplitError::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, json + "\n").map_err(|source| SplitError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SplitError> {
    let text = std::fs::read_to_string(path).map_err(|source| SplitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| SplitError::Json {
        path: path.display().to_string(),
        source,
    })
}
