//! Classification instances built from patient turns, with minimum-length
//! concatenation of consecutive turns inside one document.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{extract_patient_turns, AttachmentLabel, ClassDistribution, Corpus, SpeechTurn, Transcript};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("document {doc_id:?} has no label")]
    UnlabeledDocument { doc_id: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed instance: {message}")]
    MalformedRecord { line: usize, message: String },
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    pub doc_id: String,
    pub label: AttachmentLabel,
    pub word_count: usize,
    /// Transcript indices of the concatenated patient turns.
    pub source_turn_indices: Vec<usize>,
    pub text: String,
}

impl Instance {
    fn from_chunk(doc_id: &str, label: AttachmentLabel, chunk: &[&SpeechTurn]) -> Self {
        let text = chunk
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        Instance {
            instance_id: format!("{doc_id}:{}", chunk[0].index),
            doc_id: doc_id.to_string(),
            label,
            word_count: word_count(&text),
            source_turn_indices: chunk.iter().map(|t| t.index).collect(),
            text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinLengthConfig {
    /// Minimum instance length in words; 0 disables concatenation.
    pub min_length: usize,
    /// Keep a document's trailing chunk that stays under the threshold after
    /// absorbing two or more turns. A trailing single turn under the
    /// threshold is always dropped.
    #[serde(default = "default_keep_trailing")]
    pub keep_trailing_combined: bool,
}

fn default_keep_trailing() -> bool {
    true
}

impl MinLengthConfig {
    pub fn new(min_length: usize) -> Self {
        MinLengthConfig {
            min_length,
            keep_trailing_combined: true,
        }
    }
}

impl Default for MinLengthConfig {
    fn default() -> Self {
        Self::new(0)
    }
}

/// Word-count thresholds used in the input-length ablation.
pub const SWEEP_MIN_LENGTHS: [usize; 5] = [0, 50, 100, 150, 250];

/// Greedy forward scan over the document's patient turns: a turn under the
/// threshold absorbs the following patient turn until the threshold is met.
pub fn build_instances(t: &Transcript, cfg: MinLengthConfig) -> Result<Vec<Instance>, InstanceError> {
    let label = t.label.ok_or_else(|| InstanceError::UnlabeledDocument {
        doc_id: t.doc_id.clone(),
    })?;
    let mut out = Vec::new();
    let mut chunk: Vec<&SpeechTurn> = Vec::new();
    let mut words = 0usize;
    for turn in extract_patient_turns(t) {
        chunk.push(turn);
        words += word_count(&turn.text);
        if words >= cfg.min_length {
            out.push(Instance::from_chunk(&t.doc_id, label, &chunk));
            chunk.clear();
            words = 0;
        }
    }
    if chunk.len() >= 2 && cfg.keep_trailing_combined {
        out.push(Instance::from_chunk(&t.doc_id, label, &chunk));
    }
    Ok(out)
}

pub fn build_corpus_instances(
    c: &Corpus,
    cfg: MinLengthConfig,
) -> Result<(Vec<Instance>, ClassDistribution), InstanceError> {
    let mut all = Vec::new();
    for doc in &c.documents {
        all.extend(build_instances(doc, cfg)?);
    }
    let dist = ClassDistribution::from_labels(all.iter().map(|i| i.label));
    Ok((all, dist))
}

pub fn write_instances<W: Write>(instances: &[Instance], mut out: W) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_instances(instances: &[Instance], path: &Path) -> Result<(), InstanceError> {
    let io_err = |source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write_instances(instances, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn read_instances<R: BufRead>(reader: R) -> Result<Vec<Instance>, InstanceError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let malformed = |message: String| InstanceError::MalformedRecord {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if inst.word_count != word_count(&inst.text) {
            return Err(malformed(format!(
                "word_count {} disagrees with text ({} words)",
                inst.word_count,
                word_count(&inst.text)
            )));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances(path: &Path) -> Result<Vec<Instance>, InstanceError> {
    let file = File::open(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_instances(BufReader::new(file))
}
