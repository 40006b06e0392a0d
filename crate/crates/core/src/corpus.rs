//! Speaker-tagged transcript corpora: data model, JSONL ingestion and
//! descriptive statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::word_count;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("line {line}: unknown speaker {speaker:?}")]
    UnknownSpeaker { line: usize, speaker: String },
    #[error("line {line}: turn {index} of document {doc_id:?} is empty after trimming")]
    EmptyTurn {
        line: usize,
        doc_id: String,
        index: usize,
    },
    #[error("document {doc_id:?} has no label")]
    MissingLabel { doc_id: String },
    #[error("line {line}: duplicate doc_id {doc_id:?}")]
    DuplicateDocId { line: usize, doc_id: String },
    #[error("histogram bins must start at 0 and be strictly increasing, got {bins:?}")]
    NonMonotonicBins { bins: Vec<usize> },
}

/// Attachment classification of a patient. Iteration order is fixed as
/// (Avoidant, Secure, Preoccupied) everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachmentLabel {
    Avoidant,
    Secure,
    Preoccupied,
}

impl AttachmentLabel {
    pub const ALL: [AttachmentLabel; 3] = [
        AttachmentLabel::Avoidant,
        AttachmentLabel::Secure,
        AttachmentLabel::Preoccupied,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttachmentLabel::Avoidant => "avoidant",
            AttachmentLabel::Secure => "secure",
            AttachmentLabel::Preoccupied => "preoccupied",
        }
    }

    /// Single-letter abbreviation used in plots and tables.
    pub fn short(self) -> char {
        match self {
            AttachmentLabel::Avoidant => 'A',
            AttachmentLabel::Secure => 'S',
            AttachmentLabel::Preoccupied => 'P',
        }
    }
}

impl fmt::Display for AttachmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttachmentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "avoidant" => Ok(AttachmentLabel::Avoidant),
            "secure" => Ok(AttachmentLabel::Secure),
            "preoccupied" => Ok(AttachmentLabel::Preoccupied),
            other => Err(format!("unknown attachment label {other:?}")),
        }
    }
}

/// One value per attachment label. Serializes as a JSON object keyed by the
/// lowercase label name.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerLabel<T>(pub [T; 3]);

impl<T> PerLabel<T> {
    pub fn from_fn(mut f: impl FnMut(AttachmentLabel) -> T) -> Self {
        PerLabel(AttachmentLabel::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttachmentLabel, &T)> {
        AttachmentLabel::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerLabel<U> {
        PerLabel::from_fn(|l| f(&self[l]))
    }
}

impl<T> Index<AttachmentLabel> for PerLabel<T> {
    type Output = T;
    fn index(&self, label: AttachmentLabel) -> &T {
        &self.0[label.index()]
    }
}

impl<T> IndexMut<AttachmentLabel> for PerLabel<T> {
    fn index_mut(&mut self, label: AttachmentLabel) -> &mut T {
        &mut self.0[label.index()]
    }
}

impl<T: Serialize> Serialize for PerLabel<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(3))?;
        for (label, value) in self.iter() {
            map.serialize_entry(label.as_str(), value)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerLabel<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mut map = BTreeMap::<AttachmentLabel, T>::deserialize(deserializer)?;
        let mut take = |l: AttachmentLabel| {
            map.remove(&l)
                .ok_or_else(|| serde::de::Error::custom(format!("missing key {l}")))
        };
        Ok(PerLabel([
            take(AttachmentLabel::Avoidant)?,
            take(AttachmentLabel::Secure)?,
            take(AttachmentLabel::Preoccupied)?,
        ]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Patient,
    Therapist,
}

impl Speaker {
    /// Role names seen across dialogue corpora, matched case-insensitively.
    pub fn parse(raw: &str) -> Option<Speaker> {
        match raw.trim().to_lowercase().as_str() {
            "patient" | "client" => Some(Speaker::Patient),
            "therapist" | "counselor" | "interviewer" => Some(Speaker::Therapist),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Patient => "patient",
            Speaker::Therapist => "therapist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeechTurn {
    pub doc_id: String,
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub doc_id: String,
    pub turns: Vec<SpeechTurn>,
    pub label: Option<AttachmentLabel>,
}

impl Transcript {
    /// Builds a transcript from `(speaker, text)` pairs, assigning indices in
    /// order. Texts are not validated here; `Corpus::new` does that.
    pub fn from_turns<S: Into<String>>(
        doc_id: impl Into<String>,
        label: Option<AttachmentLabel>,
        turns: impl IntoIterator<Item = (Speaker, S)>,
    ) -> Self {
        let doc_id = doc_id.into();
        let turns = turns
            .into_iter()
            .enumerate()
            .map(|(index, (speaker, text))| SpeechTurn {
                doc_id: doc_id.clone(),
                index,
                speaker,
                text: text.into(),
            })
            .collect();
        Transcript {
            doc_id,
            turns,
            label,
        }
    }

    pub fn require_label(&self) -> Result<AttachmentLabel, CorpusError> {
        self.label.ok_or_else(|| CorpusError::MissingLabel {
            doc_id: self.doc_id.clone(),
        })
    }

    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.doc_id != self.doc_id || turn.index != i {
                return Err(CorpusError::MalformedRecord {
                    line,
                    message: format!(
                        "turn {i} carries doc_id {:?} / index {}",
                        turn.doc_id, turn.index
                    ),
                });
            }
            if turn.text.trim().is_empty() {
                return Err(CorpusError::EmptyTurn {
                    line,
                    doc_id: self.doc_id.clone(),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub documents: Vec<Transcript>,
    pub provenance: BTreeMap<String, String>,
}

impl Corpus {
    /// Validates every transcript invariant and doc_id uniqueness.
    pub fn new(documents: Vec<Transcript>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, doc) in documents.iter().enumerate() {
            doc.validate(i + 1)?;
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocId {
                    line: i + 1,
                    doc_id: doc.doc_id.clone(),
                });
            }
        }
        Ok(Corpus {
            documents,
            provenance: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Transcript> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// doc_id → label for every labeled document.
    pub fn labels(&self) -> Result<BTreeMap<String, AttachmentLabel>, CorpusError> {
        self.documents
            .iter()
            .map(|d| Ok((d.doc_id.clone(), d.require_label()?)))
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.documents {
            let record = RawRecord {
                doc_id: doc.doc_id.clone(),
                label: doc.label.map(|l| l.as_str().to_string()),
                turns: doc
                    .turns
                    .iter()
                    .map(|t| RawTurn {
                        speaker: t.speaker.as_str().to_string(),
                        text: t.text.clone(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    doc_id: String,
    #[serde(default)]
    label: Option<String>,
    turns: Vec<RawTurn>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTurn {
    speaker: String,
    text: String,
}

/// Parses transcript JSONL from a reader. Empty lines are skipped; every
/// other line must hold one document.
pub fn read_corpus<R: BufRead>(reader: R, require_labels: bool) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        let label = match raw.label.as_deref() {
            None => None,
            Some(s) => Some(s.parse::<AttachmentLabel>().map_err(|message| {
                CorpusError::MalformedRecord {
                    line: line_no,
                    message,
                }
            })?),
        };
        if require_labels && label.is_none() {
            return Err(CorpusError::MissingLabel { doc_id: raw.doc_id });
        }
        if !seen.insert(raw.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId {
                line: line_no,
                doc_id: raw.doc_id,
            });
        }
        let mut turns = Vec::with_capacity(raw.turns.len());
        for t in raw.turns {
            let speaker = Speaker::parse(&t.speaker).ok_or_else(|| CorpusError::UnknownSpeaker {
                line: line_no,
                speaker: t.speaker.clone(),
            })?;
            turns.push((speaker, t.text));
        }
        let doc = Transcript::from_turns(raw.doc_id, label, turns);
        doc.validate(line_no)?;
        documents.push(doc);
    }
    Ok(Corpus {
        documents,
        provenance: BTreeMap::new(),
    })
}

pub fn load_corpus(path: &Path, require_labels: bool) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut corpus = read_corpus(BufReader::new(file), require_labels)?;
    corpus
        .provenance
        .insert("source".into(), path.display().to_string());
    Ok(corpus)
}

/// Patient turns of a transcript, in order, with their original indices.
pub fn extract_patient_turns(t: &Transcript) -> Vec<&SpeechTurn> {
    t.turns
        .iter()
        .filter(|turn| turn.speaker == Speaker::Patient)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: PerLabel<usize>,
    pub proportions: PerLabel<f64>,
}

impl ClassDistribution {
    pub fn from_counts(counts: PerLabel<usize>) -> Self {
        let total: usize = counts.0.iter().sum();
        let proportions = counts.map(|&c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        });
        ClassDistribution {
            counts,
            proportions,
        }
    }

    pub fn from_labels(labels: impl IntoIterator<Item = AttachmentLabel>) -> Self {
        let mut counts = PerLabel([0usize; 3]);
        for l in labels {
            counts[l] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn total(&self) -> usize {
        self.counts.0.iter().sum()
    }
}

impl fmt::Display for ClassDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(l, c)| format!("{l}: {c} ({:.1}%)", 100.0 * self.proportions[l]))
            .collect();
        write!(f, "{} [total {}]", parts.join(", "), self.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsLevel {
    Document,
    Turn,
}

pub fn corpus_stats(c: &Corpus, level: StatsLevel) -> Result<ClassDistribution, CorpusError> {
    let mut counts = PerLabel([0usize; 3]);
    for doc in &c.documents {
        let label = doc.require_label()?;
        counts[label] += match level {
            StatsLevel::Document => 1,
            StatsLevel::Turn => extract_patient_turns(doc).len(),
        };
    }
    Ok(ClassDistribution::from_counts(counts))
}

/// Per-label counts of patient turns by word-count bin. Bin `i` covers
/// `[boundaries[i], boundaries[i + 1])`; the last bin is open-ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLengthHistogram {
    pub boundaries: Vec<usize>,
    pub counts: PerLabel<Vec<usize>>,
    pub mean_length: PerLabel<f64>,
}

impl TurnLengthHistogram {
    pub fn bin_label(&self, i: usize) -> String {
        match self.boundaries.get(i + 1) {
            Some(hi) => format!("{}-{}", self.boundaries[i], hi - 1),
            None => format!("{}+", self.boundaries[i]),
        }
    }
}

pub fn turn_length_histogram(
    c: &Corpus,
    bins: &[usize],
) -> Result<TurnLengthHistogram, CorpusError> {
    if bins.first() != Some(&0) || bins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CorpusError::NonMonotonicBins {
            bins: bins.to_vec(),
        });
    }
    let mut counts = PerLabel::from_fn(|_| vec![0usize; bins.len()]);
    let mut sums = PerLabel([0usize; 3]);
    let mut totals = PerLabel([0usize; 3]);
    for doc in &c.documents {
        let label = doc.require_label()?;
        for turn in extract_patient_turns(doc) {
            let n = word_count(&turn.text);
            // bins[0] == 0, so the partition point is at least 1
            let bin = bins.partition_point(|&b| b <= n) - 1;
            counts[label][bin] += 1;
            sums[label] += n;
            totals[label] += 1;
        }
    }
    let mean_length = PerLabel::from_fn(|l| {
        if totals[l] == 0 {
            0.0
        } else {
            sums[l] as f64 / totals[l] as f64
        }
    });
    Ok(TurnLengthHistogram {
        boundaries: bins.to_vec(),
        counts,
        mean_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, require: bool) -> Result<Corpus, CorpusError> {
        read_corpus(s.as_bytes(), require)
    }

    const TWO_DOCS: &str = r#"{"doc_id": "d1", "label": "secure", "turns": [{"speaker": "therapist", "text": "How are you?"}, {"speaker": "patient", "text": "Fine."}]}
{"doc_id": "d2", "label": "preoccupied", "turns": [{"speaker": "Client", "text": "I keep thinking about it"}, {"speaker": "Counselor", "text": "Go on"}]}
"#;

    #[test]
    fn loads_two_labeled_documents() {
        let c = parse(TWO_DOCS, true).unwrap();
        assert_eq!(c.len(), 2);
        let dist = corpus_stats(&c, StatsLevel::Document).unwrap();
        assert_eq!(dist.counts.0, [0, 1, 1]);
        assert_eq!(c.documents[1].turns[0].speaker, Speaker::Patient);
        assert_eq!(c.documents[1].turns[1].speaker, Speaker::Therapist);
    }

    #[test]
    fn unknown_speaker_names_line() {
        let input = format!(
            "{}{}",
            TWO_DOCS,
            r#"{"doc_id": "d3", "label": null, "turns": [{"speaker": "nurse", "text": "hi"}]}"#
        );
        match parse(&input, false) {
            Err(CorpusError::UnknownSpeaker { line, speaker }) => {
                assert_eq!(line, 3);
                assert_eq!(speaker, "nurse");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line() {
        let input = "{\"doc_id\": \"a\", \"turns\": []}\n{not json\n";
        assert!(matches!(
            parse(input, false),
            Err(CorpusError::MalformedRecord { line: 2, .. })
        ));
    }

    #[test]
    fn bad_label_is_malformed() {
        let input = r#"{"doc_id": "a", "label": "disorganized", "turns": []}"#;
        assert!(matches!(
            parse(input, false),
            Err(CorpusError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn missing_label_when_required() {
        let input = r#"{"doc_id": "a", "turns": [{"speaker": "patient", "text": "x"}]}"#;
        assert!(parse(input, false).is_ok());
        assert!(matches!(
            parse(input, true),
            Err(CorpusError::MissingLabel { .. })
        ));
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let input = "{\"doc_id\": \"a\", \"turns\": []}\n{\"doc_id\": \"a\", \"turns\": []}\n";
        assert!(matches!(
            parse(input, false),
            Err(CorpusError::DuplicateDocId { line: 2, .. })
        ));
    }

    #[test]
    fn whitespace_turn_rejected() {
        let input = r#"{"doc_id": "a", "turns": [{"speaker": "patient", "text": "  \t "}]}"#;
        assert!(matches!(
            parse(input, false),
            Err(CorpusError::EmptyTurn { index: 0, .. })
        ));
    }

    #[test]
    fn patient_turns_keep_indices() {
        let t = Transcript::from_turns(
            "d",
            None,
            [
                (Speaker::Therapist, "q1"),
                (Speaker::Patient, "a1"),
                (Speaker::Therapist, "q2"),
                (Speaker::Patient, "a2"),
            ],
        );
        let p = extract_patient_turns(&t);
        assert_eq!(p.iter().map(|t| t.index).collect::<Vec<_>>(), vec![1, 3]);
        let only_therapist = Transcript::from_turns("e", None, [(Speaker::Therapist, "q")]);
        assert!(extract_patient_turns(&only_therapist).is_empty());
    }

    #[test]
    fn symmetric_stats() {
        let docs = AttachmentLabel::ALL
            .iter()
            .map(|&l| Transcript::from_turns(l.as_str(), Some(l), [(Speaker::Patient, "hello")]))
            .collect();
        let c = Corpus::new(docs).unwrap();
        for level in [StatsLevel::Document, StatsLevel::Turn] {
            let d = corpus_stats(&c, level).unwrap();
            for p in d.proportions.0 {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn histogram_bins() {
        let c = Corpus::new(vec![
            Transcript::from_turns("s", Some(AttachmentLabel::Secure), [(Speaker::Patient, "a b")]),
            Transcript::from_turns(
                "p",
                Some(AttachmentLabel::Preoccupied),
                [(Speaker::Patient, vec!["w"; 200].join(" "))],
            ),
        ])
        .unwrap();
        let h = turn_length_histogram(&c, &[0, 10]).unwrap();
        assert_eq!(h.counts[AttachmentLabel::Secure], vec![1, 0]);
        assert_eq!(h.counts[AttachmentLabel::Preoccupied], vec![0, 1]);
        assert_eq!(h.bin_label(0), "0-9");
        assert_eq!(h.bin_label(1), "10+");
        for bad in [&[][..], &[5, 10][..], &[0, 10, 10][..], &[0, 20, 10][..]] {
            assert!(matches!(
                turn_length_histogram(&c, bad),
                Err(CorpusError::NonMonotonicBins { .. })
            ));
        }
    }

    #[test]
    fn per_label_serializes_as_map() {
        let p = PerLabel([1, 2, 3]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"avoidant":1,"secure":2,"preoccupied":3}"#);
        let back: PerLabel<i32> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
