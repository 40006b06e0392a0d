//! Seeded synthetic transcript generator with a controllable learnability
//! dial: patient turns carry class-exclusive marker phrases with probability
//! `marker_strength`, and are otherwise drawn from a shared neutral lexicon.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AttachmentLabel, Corpus, CorpusError, PerLabel, Speaker, Transcript};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Inclusive range of patient turns per document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnRange {
    pub min: usize,
    pub max: usize,
}

/// Log-normal word count: `ln(words) ~ N(mu, sigma^2)`, rounded, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthDistribution {
    pub mu: f64,
    pub sigma: f64,
}

impl LengthDistribution {
    /// Parameters whose continuous mean is `mean` words.
    pub fn with_mean(mean: f64, sigma: f64) -> Self {
        LengthDistribution {
            mu: mean.ln() - sigma * sigma / 2.0,
            sigma,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.mu + self.sigma * self.sigma / 2.0).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(default = "default_doc_counts")]
    pub doc_counts: PerLabel<usize>,
    /// Patient turns per document, per label.
    #[serde(default = "default_turns_per_doc")]
    pub turns_per_doc: PerLabel<TurnRange>,
    #[serde(default = "default_turn_lengths")]
    pub turn_length_distributions: PerLabel<LengthDistribution>,
    #[serde(default = "default_marker_strength")]
    pub marker_strength: f64,
    #[serde(default = "default_interleave")]
    pub therapist_interleave: bool,
    pub seed: u64,
}

fn default_doc_counts() -> PerLabel<usize> {
    PerLabel([20, 24, 34])
}

fn default_turns_per_doc() -> PerLabel<TurnRange> {
    PerLabel([
        TurnRange { min: 40, max: 52 },
        TurnRange { min: 42, max: 54 },
        TurnRange { min: 18, max: 25 },
    ])
}

fn default_turn_lengths() -> PerLabel<LengthDistribution> {
    PerLabel([
        LengthDistribution::with_mean(15.0, 0.6),
        LengthDistribution::with_mean(10.0, 0.6),
        LengthDistribution::with_mean(22.0, 0.6),
    ])
}

fn default_marker_strength() -> f64 {
    1.0
}

fn default_interleave() -> bool {
    true
}

impl SynthConfig {
    pub fn new(seed: u64) -> Self {
        SynthConfig {
            doc_counts: default_doc_counts(),
            turns_per_doc: default_turns_per_doc(),
            turn_length_distributions: default_turn_lengths(),
            marker_strength: default_marker_strength(),
            therapist_interleave: default_interleave(),
            seed,
        }
    }

    pub fn with_marker_strength(mut self, s: f64) -> Self {
        self.marker_strength = s;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.doc_counts.0.iter().sum::<usize>() == 0 {
            return bad("doc_counts sum to zero".into());
        }
        for (l, r) in self.turns_per_doc.iter() {
            if r.min == 0 || r.min > r.max {
                return bad(format!("turns_per_doc for {l} must satisfy 1 <= min <= max"));
            }
        }
        for (l, d) in self.turn_length_distributions.iter() {
            if !d.mu.is_finite() || !d.sigma.is_finite() || d.sigma <= 0.0 {
                return bad(format!("length distribution for {l} needs finite mu and sigma > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.marker_strength) {
            return bad("marker_strength must lie in [0, 1]".into());
        }
        let mean = |l| self.turn_length_distributions[l].mean();
        if mean(AttachmentLabel::Secure) >= mean(AttachmentLabel::Preoccupied) {
            return bad("secure mean turn length must be below preoccupied".into());
        }
        Ok(())
    }
}

pub const FILLER: &[&str] = &[
    "the", "a", "and", "then", "we", "went", "was", "it", "so", "just", "about", "with", "on", "in", "at",
    "for", "this", "that", "there", "some", "maybe", "really", "kind", "of", "like", "know", "think", "said",
    "told", "going", "got", "had", "day", "week", "morning", "evening", "weekend", "work", "office", "shop",
    "train", "bus", "car", "street", "house", "kitchen", "garden", "dinner", "lunch", "coffee", "tea",
    "bread", "weather", "rain", "sun", "cold", "warm", "yesterday", "today", "tomorrow", "later", "before",
    "after", "again", "still", "also", "usually", "sometimes", "often", "brother", "sister", "neighbour",
    "colleague", "friend", "meeting", "email", "phone", "call", "book", "film", "music", "walk", "park",
    "dog", "cat", "appointment", "doctor", "holiday", "trip", "plan", "list", "job", "project", "report",
    "bill", "money", "rent", "bike", "road", "city", "town", "school", "class", "course", "game", "match",
    "news", "paper", "radio", "television", "room", "window", "door", "table", "chair", "bed", "sleep",
    "breakfast", "shopping", "cleaning", "cooking", "laundry", "groceries", "schedule", "calendar", "hour",
    "minute", "month", "year", "number", "letter", "parcel", "queue", "station", "platform", "ticket",
    "umbrella", "jacket", "shoes", "river", "hill",
];

const THERAPIST_OPENERS: &[&str] = &[
    "how did that go",
    "what happened next",
    "could you tell me more",
    "how was your week",
    "what do you make of",
];

/// Class-exclusive marker phrases in label order.
pub const MARKERS: PerLabel<&[&str]> = PerLabel([
    &[
        "handled alone",
        "nothing bothers",
        "self sufficient",
        "skip feelings",
        "distance helps",
        "independent always",
        "unneeded support",
        "shrug off",
    ],
    &[
        "felt understood",
        "trust others",
        "comfortable asking",
        "balanced perspective",
        "supported warmly",
        "reflect calmly",
        "secure connection",
        "open sharing",
    ],
    &[
        "worried constantly",
        "abandonment fear",
        "desperately clinging",
        "overwhelmed longing",
        "anxious reassurance",
        "obsessive rumination",
        "needing closeness",
        "panicked texting",
    ],
]);

fn sample_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty lexicon")).collect()
}

fn patient_turn(rng: &mut ChaCha8Rng, label: AttachmentLabel, lengths: &LogNormal<f64>, marker_strength: f64) -> String {
    let n = (lengths.sample(rng).round() as usize).max(1);
    let mut words = sample_words(rng, n);
    if marker_strength > 0.0 && rng.random_bool(marker_strength) {
        let phrase = *MARKERS[label].choose(rng).expect("non-empty lexicon");
        let at = rng.random_range(0..=words.len());
        words.insert(at, phrase);
    }
    words.join(" ")
}

fn therapist_turn(rng: &mut ChaCha8Rng) -> String {
    let opener = *THERAPIST_OPENERS.choose(rng).expect("non-empty");
    let n = rng.random_range(2..=10);
    format!("{opener} {}", sample_words(rng, n).join(" "))
}

/// Deterministic for a given config. Documents are shuffled across labels and
/// each one draws from its own stream of the seeded generator.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Corpus, SynthError> {
    cfg.validate()?;
    let lengths = cfg
        .turn_length_distributions
        .map(|d| LogNormal::new(d.mu, d.sigma).expect("validated parameters"));
    let mut labels: Vec<AttachmentLabel> = AttachmentLabel::ALL
        .into_iter()
        .flat_map(|l| std::iter::repeat_n(l, cfg.doc_counts[l]))
        .collect();
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    labels.shuffle(&mut master);

    let width = labels.len().to_string().len().max(3);
    let docs = labels
        .iter()
        .enumerate()
        .map(|(j, &label)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(j as u64 + 1);
            let range = cfg.turns_per_doc[label];
            let n_turns = rng.random_range(range.min..=range.max);
            let mut turns = Vec::with_capacity(n_turns * 2);
            for _ in 0..n_turns {
                if cfg.therapist_interleave {
                    turns.push((Speaker::Therapist, therapist_turn(&mut rng)));
                }
                turns.push((Speaker::Patient, patient_turn(&mut rng, label, &lengths[label], cfg.marker_strength)));
            }
            Transcript::from_turns(format!("synth-{j:0width$}"), Some(label), turns)
        })
        .collect();
    Ok(Corpus::new(docs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_stats, extract_patient_turns, read_corpus, StatsLevel};
    use crate::instances::{build_corpus_instances, word_count, MinLengthConfig};
    use std::collections::{BTreeMap, BTreeSet};

    /// Multinomial naive Bayes with Laplace smoothing.
    struct NaiveBayes {
        log_prior: [f64; 3],
        log_lik: [BTreeMap<String, f64>; 3],
        unseen: [f64; 3],
    }

    impl NaiveBayes {
        fn fit(data: &[(String, AttachmentLabel)]) -> Self {
            let mut docs = [0usize; 3];
            let mut counts: [BTreeMap<String, usize>; 3] = Default::default();
            let mut vocab = BTreeSet::new();
            for (text, l) in data {
                docs[l.index()] += 1;
                for w in text.split_whitespace() {
                    *counts[l.index()].entry(w.to_string()).or_default() += 1;
                    vocab.insert(w.to_string());
                }
            }
            let v = vocab.len() as f64;
            let mut log_lik: [BTreeMap<String, f64>; 3] = Default::default();
            let mut unseen = [0.0; 3];
            for c in 0..3 {
                let total: usize = counts[c].values().sum();
                let denom = total as f64 + v;
                unseen[c] = (1.0 / denom).ln();
                for w in &vocab {
                    let n = counts[c].get(w).copied().unwrap_or(0);
                    log_lik[c].insert(w.clone(), ((n as f64 + 1.0) / denom).ln());
                }
            }
            let n = data.len() as f64;
            NaiveBayes {
                log_prior: docs.map(|d| (d as f64 / n).ln()),
                log_lik,
                unseen,
            }
        }

        fn predict(&self, text: &str) -> AttachmentLabel {
            let mut best = (f64::NEG_INFINITY, 0);
            for c in 0..3 {
                let mut s = self.log_prior[c];
                for w in text.split_whitespace() {
                    s += self.log_lik[c].get(w).copied().unwrap_or(self.unseen[c]);
                }
                if s > best.0 {
                    best = (s, c);
                }
            }
            AttachmentLabel::ALL[best.1]
        }
    }

    fn turns(c: &Corpus) -> Vec<(String, AttachmentLabel)> {
        c.documents
            .iter()
            .flat_map(|d| {
                let l = d.label.unwrap();
                extract_patient_turns(d).into_iter().map(move |t| (t.text.clone(), l))
            })
            .collect()
    }

    fn instance_texts(c: &Corpus, min: usize) -> Vec<(String, AttachmentLabel)> {
        let (inst, _) = build_corpus_instances(c, MinLengthConfig::new(min)).unwrap();
        inst.into_iter().map(|i| (i.text, i.label)).collect()
    }

    fn oracle_accuracy(strength: f64, level: Option<usize>) -> f64 {
        let train = generate_corpus(&SynthConfig::new(1).with_marker_strength(strength)).unwrap();
        let test = generate_corpus(&SynthConfig::new(2).with_marker_strength(strength)).unwrap();
        let (tr, te) = match level {
            None => (turns(&train), turns(&test)),
            Some(m) => (instance_texts(&train, m), instance_texts(&test, m)),
        };
        let nb = NaiveBayes::fit(&tr);
        let hits = te.iter().filter(|(t, l)| nb.predict(t) == *l).count();
        hits as f64 / te.len() as f64
    }

    #[test]
    fn deterministic_per_seed() {
        let render = |c: &Corpus| {
            let mut v = Vec::new();
            c.write_jsonl(&mut v).unwrap();
            v
        };
        let a = render(&generate_corpus(&SynthConfig::new(7)).unwrap());
        let b = render(&generate_corpus(&SynthConfig::new(7)).unwrap());
        let c = render(&generate_corpus(&SynthConfig::new(8)).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn default_document_distribution() {
        let c = generate_corpus(&SynthConfig::new(7)).unwrap();
        let d = corpus_stats(&c, StatsLevel::Document).unwrap();
        assert_eq!(d.counts, PerLabel([20, 24, 34]));
        let pct = d.proportions.map(|p| (p * 1000.0).round() / 10.0);
        assert_eq!(pct, PerLabel([25.6, 30.8, 43.6]));
    }

    #[test]
    fn mean_turn_length_order() {
        let mut cfg = SynthConfig::new(3);
        cfg.doc_counts = PerLabel([230, 230, 480]);
        let c = generate_corpus(&cfg).unwrap();
        let mut sum = PerLabel([0usize; 3]);
        let mut n = PerLabel([0usize; 3]);
        for d in &c.documents {
            let l = d.label.unwrap();
            for t in extract_patient_turns(d) {
                sum[l] += word_count(&t.text);
                n[l] += 1;
            }
        }
        assert!(n.0.iter().all(|&k| k >= 10_000), "{n:?}");
        let mean = PerLabel::from_fn(|l| sum[l] as f64 / n[l] as f64);
        assert!(mean[AttachmentLabel::Secure] < mean[AttachmentLabel::Avoidant]);
        assert!(mean[AttachmentLabel::Avoidant] < mean[AttachmentLabel::Preoccupied]);
    }

    #[test]
    fn lexicons_disjoint() {
        let filler: BTreeSet<&str> = FILLER.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for (_, phrases) in MARKERS.iter() {
            for p in phrases.iter() {
                for w in p.split_whitespace() {
                    assert!(!filler.contains(w), "{w} in filler");
                    assert!(seen.insert(w), "{w} shared between markers");
                }
            }
        }
        for t in THERAPIST_OPENERS {
            assert!(t.split_whitespace().all(|w| !seen.contains(w)));
        }
    }

    #[test]
    fn roundtrips_through_loader() {
        let c = generate_corpus(&SynthConfig::new(11)).unwrap();
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        let back = read_corpus(buf.as_slice(), true).unwrap();
        assert_eq!(back.documents, c.documents);
    }

    #[test]
    fn therapist_interleave_toggle() {
        let mut cfg = SynthConfig::new(5);
        cfg.therapist_interleave = false;
        let c = generate_corpus(&cfg).unwrap();
        assert!(c.documents.iter().flat_map(|d| &d.turns).all(|t| t.speaker == Speaker::Patient));
        let c = generate_corpus(&SynthConfig::new(5)).unwrap();
        assert!(c.documents.iter().all(|d| d.turns[0].speaker == Speaker::Therapist));
    }

    #[test]
    fn invalid_configs() {
        let mut c = SynthConfig::new(0);
        c.marker_strength = 1.5;
        assert!(generate_corpus(&c).is_err());
        let mut c = SynthConfig::new(0);
        c.doc_counts = PerLabel([0, 0, 0]);
        assert!(generate_corpus(&c).is_err());
        let mut c = SynthConfig::new(0);
        c.turns_per_doc[AttachmentLabel::Secure] = TurnRange { min: 5, max: 2 };
        assert!(generate_corpus(&c).is_err());
        let mut c = SynthConfig::new(0);
        c.turn_length_distributions[AttachmentLabel::Secure] = LengthDistribution::with_mean(30.0, 0.5);
        assert!(matches!(generate_corpus(&c), Err(SynthError::InvalidConfig(_))));
    }

    #[test]
    fn config_json_defaults() {
        let c: SynthConfig = serde_json::from_str(r#"{"seed": 4, "marker_strength": 0.5}"#).unwrap();
        assert_eq!(c.doc_counts, PerLabel([20, 24, 34]));
        assert_eq!(c.marker_strength, 0.5);
        assert!(serde_json::from_str::<SynthConfig>("{}").is_err());
    }

    #[test]
    fn markers_make_turns_separable() {
        let acc = oracle_accuracy(1.0, None);
        assert!(acc >= 0.99, "turn-level oracle accuracy {acc}");
    }

    #[test]
    fn no_markers_no_signal() {
        let turn = oracle_accuracy(0.0, None);
        assert!(turn <= 0.45, "turn-level oracle accuracy {turn}");
        let inst = oracle_accuracy(0.0, Some(50));
        assert!(inst <= 0.45, "min-50 oracle accuracy {inst}");
    }
}
