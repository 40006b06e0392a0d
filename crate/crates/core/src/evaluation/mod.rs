//! Metrics, confusion matrices, cross-fold aggregation, clinical cost
//! scoring and input-length sweep reports.

pub mod plots;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttachmentLabel, ClassDistribution, PerLabel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no labels to evaluate")]
    EmptyInput,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("cost matrix must be 3x3, got {rows}x{cols}")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error("invalid cost matrix: {0}")]
    InvalidCosts(String),
    #[error("sweep has no runs")]
    EmptyRuns,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("plot rendering failed: {0}")]
    Plot(String),
}

/// Rows are gold labels, columns predicted labels, both in fixed label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: AttachmentLabel, pred: AttachmentLabel) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, gold: AttachmentLabel) -> u64 {
        self.counts[gold.index()].iter().sum()
    }

    pub fn col_sum(&self, pred: AttachmentLabel) -> u64 {
        self.counts.iter().map(|r| r[pred.index()]).sum()
    }
}

pub fn confusion(gold: &[AttachmentLabel], pred: &[AttachmentLabel]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub precision: PerLabel<f64>,
    pub recall: PerLabel<f64>,
    /// Zero-denominator cases that were scored as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut warnings = Vec::new();
    let mut ratio = |num: u64, den: u64, what: &str, label: AttachmentLabel| {
        if den == 0 {
            warnings.push(format!("{what} of {label} undefined (no instances); scored as 0"));
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let mut precision = PerLabel([0.0; 3]);
    let mut recall = PerLabel([0.0; 3]);
    for l in AttachmentLabel::ALL {
        let hit = cm.get(l, l);
        precision[l] = ratio(hit, cm.col_sum(l), "precision", l);
        recall[l] = ratio(hit, cm.row_sum(l), "recall", l);
    }
    Ok(MetricReport {
        n: total,
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: precision.0.iter().sum::<f64>() / 3.0,
        macro_recall: recall.0.iter().sum::<f64>() / 3.0,
        precision,
        recall,
        warnings,
    })
}

/// Arithmetic mean and population (n-divisor) standard deviation.
pub fn aggregate_folds(values: &[f64]) -> Result<(f64, f64), EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Per-confusion clinical costs, rows gold and columns predicted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CostMatrix {
    pub costs: [[f64; 3]; 3],
}

impl Default for CostMatrix {
    /// Secure mistaken for insecure is mildest; insecure mistaken for secure
    /// is worse, less so for avoidant; confusing the two insecure styles is
    /// worst.
    fn default() -> Self {
        use AttachmentLabel::*;
        let mut costs = [[0.0; 3]; 3];
        let mut set = |g: AttachmentLabel, p: AttachmentLabel, c: f64| costs[g.index()][p.index()] = c;
        set(Secure, Avoidant, 1.0);
        set(Secure, Preoccupied, 1.0);
        set(Avoidant, Secure, 2.0);
        set(Preoccupied, Secure, 3.0);
        set(Avoidant, Preoccupied, 4.0);
        set(Preoccupied, Avoidant, 4.0);
        CostMatrix { costs }
    }
}

impl CostMatrix {
    pub fn cost(&self, gold: AttachmentLabel, pred: AttachmentLabel) -> f64 {
        self.costs[gold.index()][pred.index()]
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EvalError> {
        let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
        if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
            return Err(EvalError::DimensionMismatch { rows: rows.len(), cols });
        }
        let mut costs = [[0.0; 3]; 3];
        for (i, r) in rows.iter().enumerate() {
            costs[i].copy_from_slice(r);
        }
        let m = CostMatrix { costs };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for i in 0..3 {
            if self.costs[i][i] != 0.0 {
                return Err(EvalError::InvalidCosts("diagonal must be exactly 0".into()));
            }
            if self.costs[i].iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(EvalError::InvalidCosts("costs must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    /// `cost(S->A), cost(S->P) < cost(A->S) < cost(P->S) < cost(A->P) = cost(P->A)`.
    pub fn satisfies_severity_ordering(&self) -> bool {
        use AttachmentLabel::*;
        let c = |g, p| self.cost(g, p);
        c(Secure, Avoidant).max(c(Secure, Preoccupied)) < c(Avoidant, Secure)
            && c(Avoidant, Secure) < c(Preoccupied, Secure)
            && c(Preoccupied, Secure) < c(Avoidant, Preoccupied)
            && c(Avoidant, Preoccupied) == c(Preoccupied, Avoidant)
    }
}

impl TryFrom<Vec<Vec<f64>>> for CostMatrix {
    type Error = EvalError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        CostMatrix::from_rows(&rows)
    }
}

impl From<CostMatrix> for Vec<Vec<f64>> {
    fn from(m: CostMatrix) -> Self {
        m.costs.iter().map(|r| r.to_vec()).collect()
    }
}

/// Mean clinical cost per evaluated instance.
pub fn cost_score(cm: &ConfusionMatrix, costs: &CostMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut sum = 0.0;
    for g in 0..3 {
        for p in 0..3 {
            sum += cm.counts[g][p] as f64 * costs.costs[g][p];
        }
    }
    Ok(sum / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    /// Instances the accuracy was measured on.
    pub n_instances: usize,
}

/// All fold results for one minimum input length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub min_length: usize,
    pub folds: Vec<FoldResult>,
    /// Label distribution of all instances built at this length.
    pub distribution: ClassDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub min_length: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `fold_accuracies`.
    pub std: f64,
    pub fold_instances: Vec<usize>,
    pub n_instances: usize,
    pub distribution: ClassDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

pub fn sweep_report(runs: &[SweepRun]) -> Result<SweepReport, EvalError> {
    if runs.is_empty() || runs.iter().any(|r| r.folds.is_empty()) {
        return Err(EvalError::EmptyRuns);
    }
    let mut entries: Vec<SweepEntry> = runs
        .iter()
        .map(|r| {
            let accs: Vec<f64> = r.folds.iter().map(|f| f.accuracy).collect();
            let (mean, std) = aggregate_folds(&accs)?;
            Ok(SweepEntry {
                min_length: r.min_length,
                fold_accuracies: accs,
                mean,
                std,
                fold_instances: r.folds.iter().map(|f| f.n_instances).collect(),
                n_instances: r.distribution.total(),
                distribution: r.distribution.clone(),
            })
        })
        .collect::<Result<_, EvalError>>()?;
    entries.sort_by_key(|e| e.min_length);
    Ok(SweepReport { entries })
}

impl SweepReport {
    /// `min_length,fold,accuracy,mean,std,n_instances`, one row per fold.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("min_length,fold,accuracy,mean,std,n_instances\n");
        for e in &self.entries {
            for (fold, (acc, n)) in e.fold_accuracies.iter().zip(&e.fold_instances).enumerate() {
                let _ = writeln!(out, "{},{},{},{},{},{}", e.min_length, fold, acc, e.mean, e.std, n);
            }
        }
        out
    }

    /// Human-readable summary table (accuracies in percent).
    pub fn to_table(&self) -> String {
        let mut out = String::from("min_length  mean_acc  std(pop)  n_instances  avoidant  secure  preoccupied\n");
        for e in &self.entries {
            let p = &e.distribution.proportions;
            let _ = writeln!(
                out,
                "{:>10}  {:>8.2}  {:>8.2}  {:>11}  {:>7.2}%  {:>5.2}%  {:>10.2}%",
                e.min_length,
                100.0 * e.mean,
                100.0 * e.std,
                e.n_instances,
                100.0 * p[AttachmentLabel::Avoidant],
                100.0 * p[AttachmentLabel::Secure],
                100.0 * p[AttachmentLabel::Preoccupied],
            );
        }
        out
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    std::fs::write(path, contents).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}
