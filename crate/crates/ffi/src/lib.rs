//! C ABI over the attachclass pipeline.
//!
//! Every fallible function returns an [`AcStatus`] and writes results
//! through out-pointers. On failure, `ac_last_error_message` returns a
//! description that stays valid until the next call on the same thread.
//! Labels are passed as integers: 0 avoidant, 1 secure, 2 preoccupied.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use attachclass::corpus::{load_corpus, AttachmentLabel, Corpus, PerLabel};
use attachclass::ensemble::{decide, probability_sums};
use attachclass::evaluation::{aggregate_folds, confusion, cost_score, metrics, ConfusionMatrix, CostMatrix};
use attachclass::instances::{build_corpus_instances, word_count, Instance, MinLengthConfig};
use attachclass::synthgen::{generate_corpus, SynthConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    IoError = 4,
    Panic = 5,
}

/// Loaded or generated transcript corpus.
pub struct AcCorpus {
    inner: Corpus,
}

/// Instances built from a corpus at one minimum length.
pub struct AcInstances {
    inner: Vec<Instance>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AcMetrics {
    pub n: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Indexed by label.
    pub precision: [f64; 3],
    pub recall: [f64; 3],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(AcStatus, String);

impl Fail {
    fn invalid(msg: impl Into<String>) -> Self {
        Fail(AcStatus::InvalidArgument, msg.into())
    }
    fn data(msg: impl std::fmt::Display) -> Self {
        Fail(AcStatus::InvalidData, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AcStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(AcStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::invalid(format!("{name} is not valid UTF-8")))
}

fn label_arg(v: i32) -> Result<AttachmentLabel, Fail> {
    usize::try_from(v)
        .ok()
        .and_then(AttachmentLabel::from_index)
        .ok_or_else(|| Fail::invalid(format!("label {v} out of range 0..=2")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn matrix_arg(p: *const u64) -> Result<ConfusionMatrix, Fail> {
    let s = slice_arg(p, 9, "counts")?;
    let mut cm = ConfusionMatrix::default();
    for (i, v) in s.iter().enumerate() {
        cm.counts[i / 3][i % 3] = *v;
    }
    Ok(cm)
}

/// Message for the most recent failure on this thread, or null.
#[no_mangle]
pub extern "C" fn ac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_word_count(text: *const c_char, out: *mut usize) -> AcStatus {
    guard(|| {
        let t = str_arg(text, "text")?;
        non_null(out, "out")?;
        *out = word_count(t);
        Ok(())
    })
}

/// Loads transcript JSONL. Free the result with `ac_corpus_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_corpus_load(path: *const c_char, require_labels: bool, out: *mut *mut AcCorpus) -> AcStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        non_null(out, "out")?;
        let corpus = load_corpus(Path::new(p), require_labels).map_err(|e| match e {
            attachclass::corpus::CorpusError::Io { .. } => Fail(AcStatus::IoError, e.to_string()),
            other => Fail::data(other),
        })?;
        *out = Box::into_raw(Box::new(AcCorpus { inner: corpus }));
        Ok(())
    })
}

/// Generates a synthetic corpus from a JSON generator config (a `seed`
/// field is required). Free the result with `ac_corpus_free`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_synth_generate(config_json: *const c_char, out: *mut *mut AcCorpus) -> AcStatus {
    guard(|| {
        let json = str_arg(config_json, "config_json")?;
        non_null(out, "out")?;
        let cfg: SynthConfig = serde_json::from_str(json).map_err(|e| Fail::invalid(e.to_string()))?;
        let corpus = generate_corpus(&cfg).map_err(|e| Fail::invalid(e.to_string()))?;
        *out = Box::into_raw(Box::new(AcCorpus { inner: corpus }));
        Ok(())
    })
}

/// # Safety
/// `corpus` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ac_corpus_save(corpus: *const AcCorpus, path: *const c_char) -> AcStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        let p = str_arg(path, "path")?;
        (*corpus)
            .inner
            .save(Path::new(p))
            .map_err(|e| Fail(AcStatus::IoError, e.to_string()))
    })
}

/// # Safety
/// `corpus` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_corpus_len(corpus: *const AcCorpus, out: *mut usize) -> AcStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        *out = (*corpus).inner.len();
        Ok(())
    })
}

/// # Safety
/// `corpus` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ac_corpus_free(corpus: *mut AcCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Concatenates patient turns per document until each instance reaches
/// `min_length` words. Free the result with `ac_instances_free`.
///
/// # Safety
/// `corpus` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_build_instances(
    corpus: *const AcCorpus,
    min_length: usize,
    keep_trailing_combined: bool,
    out: *mut *mut AcInstances,
) -> AcStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        let cfg = MinLengthConfig {
            min_length,
            keep_trailing_combined,
        };
        let (inst, _) = build_corpus_instances(&(*corpus).inner, cfg).map_err(Fail::data)?;
        *out = Box::into_raw(Box::new(AcInstances { inner: inst }));
        Ok(())
    })
}

/// # Safety
/// `instances` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ac_instances_len(instances: *const AcInstances, out: *mut usize) -> AcStatus {
    guard(|| {
        non_null(instances, "instances")?;
        non_null(out, "out")?;
        *out = (*instances).inner.len();
        Ok(())
    })
}

/// Word count and label of instance `index`.
///
/// # Safety
/// `instances` must come from this library; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_instances_get(
    instances: *const AcInstances,
    index: usize,
    out_word_count: *mut usize,
    out_label: *mut i32,
) -> AcStatus {
    guard(|| {
        non_null(instances, "instances")?;
        non_null(out_word_count, "out_word_count")?;
        non_null(out_label, "out_label")?;
        let all = &(*instances).inner;
        let inst = all
            .get(index)
            .ok_or_else(|| Fail::invalid(format!("index {index} out of range ({} instances)", all.len())))?;
        *out_word_count = inst.word_count;
        *out_label = inst.label.index() as i32;
        Ok(())
    })
}

/// # Safety
/// `instances` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ac_instances_free(instances: *mut AcInstances) {
    if !instances.is_null() {
        drop(Box::from_raw(instances));
    }
}

/// Mean and population standard deviation of `n` values.
///
/// # Safety
/// `values` must point to `n` doubles; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_aggregate_folds(
    values: *const f64,
    n: usize,
    out_mean: *mut f64,
    out_std: *mut f64,
) -> AcStatus {
    guard(|| {
        let v = slice_arg(values, n, "values")?;
        non_null(out_mean, "out_mean")?;
        non_null(out_std, "out_std")?;
        let (m, s) = aggregate_folds(v).map_err(|e| Fail::invalid(e.to_string()))?;
        *out_mean = m;
        *out_std = s;
        Ok(())
    })
}

/// Row-major 3x3 counts (rows gold, columns predicted) into `out_counts`.
///
/// # Safety
/// `gold` and `pred` must point to `n` ints; `out_counts` to 9 u64 slots.
#[no_mangle]
pub unsafe extern "C" fn ac_confusion(gold: *const i32, pred: *const i32, n: usize, out_counts: *mut u64) -> AcStatus {
    guard(|| {
        let g = slice_arg(gold, n, "gold")?
            .iter()
            .map(|&v| label_arg(v))
            .collect::<Result<Vec<_>, _>>()?;
        let p = slice_arg(pred, n, "pred")?
            .iter()
            .map(|&v| label_arg(v))
            .collect::<Result<Vec<_>, _>>()?;
        non_null(out_counts, "out_counts")?;
        let cm = confusion(&g, &p).map_err(|e| Fail::invalid(e.to_string()))?;
        let out = std::slice::from_raw_parts_mut(out_counts, 9);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = cm.counts[i / 3][i % 3];
        }
        Ok(())
    })
}

/// # Safety
/// `counts` must point to 9 u64 values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_metrics(counts: *const u64, out: *mut AcMetrics) -> AcStatus {
    guard(|| {
        let cm = matrix_arg(counts)?;
        non_null(out, "out")?;
        let m = metrics(&cm).map_err(|e| Fail::invalid(e.to_string()))?;
        *out = AcMetrics {
            n: m.n,
            accuracy: m.accuracy,
            macro_precision: m.macro_precision,
            macro_recall: m.macro_recall,
            precision: m.precision.0,
            recall: m.recall.0,
        };
        Ok(())
    })
}

/// Default clinical cost matrix, row-major, rows gold.
///
/// # Safety
/// `out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ac_default_costs(out: *mut f64) -> AcStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = CostMatrix::default();
        let o = std::slice::from_raw_parts_mut(out, 9);
        for (i, slot) in o.iter_mut().enumerate() {
            *slot = c.costs[i / 3][i % 3];
        }
        Ok(())
    })
}

/// Mean per-instance cost. `costs` may be null for the default matrix.
///
/// # Safety
/// `counts` must point to 9 u64 values, `costs` to 9 doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn ac_cost_score(counts: *const u64, costs: *const f64, out: *mut f64) -> AcStatus {
    guard(|| {
        let cm = matrix_arg(counts)?;
        non_null(out, "out")?;
        let matrix = if costs.is_null() {
            CostMatrix::default()
        } else {
            let rows: Vec<Vec<f64>> = std::slice::from_raw_parts(costs, 9).chunks(3).map(<[f64]>::to_vec).collect();
            CostMatrix::from_rows(&rows).map_err(|e| Fail::invalid(e.to_string()))?
        };
        *out = cost_score(&cm, &matrix).map_err(|e| Fail::invalid(e.to_string()))?;
        Ok(())
    })
}

/// Majority vote for one instance over `n_models` predictions. `probs`
/// holds 3 probabilities per model in label order; it breaks vote ties by
/// summed probability, then by label order.
///
/// # Safety
/// `votes` must point to `n_models` ints and `probs` to `3 * n_models`
/// doubles; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ac_majority_vote(
    votes: *const i32,
    probs: *const f64,
    n_models: usize,
    out_winner: *mut i32,
    out_tie_broken: *mut bool,
) -> AcStatus {
    guard(|| {
        if n_models == 0 {
            return Err(Fail::invalid("no models to vote over"));
        }
        let v = slice_arg(votes, n_models, "votes")?
            .iter()
            .map(|&x| label_arg(x))
            .collect::<Result<Vec<_>, _>>()?;
        let p = slice_arg(probs, 3 * n_models, "probs")?;
        non_null(out_winner, "out_winner")?;
        non_null(out_tie_broken, "out_tie_broken")?;
        let rows: Vec<PerLabel<f64>> = p.chunks(3).map(|r| PerLabel([r[0], r[1], r[2]])).collect();
        let sums = probability_sums(&rows);
        let (winner, tie) = decide(&v, &sums);
        *out_winner = winner.index() as i32;
        *out_tie_broken = tie;
        Ok(())
    })
}
