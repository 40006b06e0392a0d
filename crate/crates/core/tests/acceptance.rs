//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use attachclass::corpus::{AttachmentLabel, ClassDistribution, Corpus, PerLabel, Speaker, Transcript};
use attachclass::ensemble::majority_vote;
use attachclass::evaluation::{aggregate_folds, confusion, cost_score, metrics, ConfusionMatrix, CostMatrix};
use attachclass::experiment::{rerun_manifest, run_experiment, ExperimentConfig, ExperimentOutcome};
use attachclass::instances::{build_instances, MinLengthConfig, SWEEP_MIN_LENGTHS};
use attachclass::modeling::{prepare_mlm_data, MLMConfig, Prediction};
use attachclass::splits::stratified_split;
use attachclass::synthgen::{generate_corpus, SynthConfig};
use AttachmentLabel::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

// ---- randomized documents -------------------------------------------------

fn random_document(rng: &mut ChaCha8Rng, id: usize, max_patient: usize) -> Transcript {
    let n_turns = rng.random_range(0..=max_patient * 2);
    let mut turns = Vec::new();
    let mut patient = 0;
    let mut word = 0usize;
    for _ in 0..n_turns {
        let speaker = if patient < max_patient && rng.random_bool(0.65) {
            patient += 1;
            Speaker::Patient
        } else {
            Speaker::Therapist
        };
        let len = match rng.random_range(0..100) {
            0..50 => rng.random_range(1..=20),
            50..85 => rng.random_range(20..=80),
            _ => rng.random_range(80..=300),
        };
        let text: Vec<String> = (0..len)
            .map(|_| {
                word += 1;
                format!("w{word}")
            })
            .collect();
        turns.push((speaker, text.join(" ")));
    }
    let label = AttachmentLabel::ALL[id % 3];
    Transcript::from_turns(format!("d{id}"), Some(label), turns)
}

/// (turn indices, word count, text) for every emitted instance.
type Expected = Vec<(Vec<usize>, usize, String)>;

/// Enumerates every partition of the patient turns into consecutive chunks
/// and keeps the one satisfying the declarative rule: each chunk is minimal
/// (a single turn, or the chunk without its last turn is under the
/// threshold), and every chunk but the last reaches the threshold. The last
/// chunk is emitted if it reaches the threshold, or if it stays under it
/// with two or more turns and trailing chunks are kept.
fn brute_force(t: &Transcript, min_length: usize, keep_trailing: bool) -> Expected {
    let patient: Vec<(usize, usize, &str)> = t
        .turns
        .iter()
        .filter(|x| x.speaker == Speaker::Patient)
        .map(|x| (x.index, x.text.split_whitespace().count(), x.text.as_str()))
        .collect();
    let n = patient.len();
    if n == 0 {
        return Vec::new();
    }
    let mut found: Vec<Expected> = Vec::new();
    for mask in 0u32..(1 << (n - 1)) {
        let mut chunks: Vec<&[(usize, usize, &str)]> = Vec::new();
        let mut start = 0;
        for gap in 0..n - 1 {
            if mask & (1 << gap) != 0 {
                chunks.push(&patient[start..=gap]);
                start = gap + 1;
            }
        }
        chunks.push(&patient[start..]);
        let sum = |c: &[(usize, usize, &str)]| c.iter().map(|x| x.1).sum::<usize>();
        let minimal = |c: &[(usize, usize, &str)]| c.len() == 1 || sum(&c[..c.len() - 1]) < min_length;
        let last = chunks.len() - 1;
        let valid = chunks
            .iter()
            .enumerate()
            .all(|(i, c)| minimal(c) && (i == last || sum(c) >= min_length));
        if !valid {
            continue;
        }
        let emitted = chunks
            .iter()
            .enumerate()
            .filter(|(i, c)| *i < last || sum(c) >= min_length || (keep_trailing && c.len() >= 2))
            .map(|(_, c)| {
                let text = c.iter().map(|x| x.2).collect::<Vec<_>>().join(" ");
                (c.iter().map(|x| x.0).collect(), sum(c), text)
            })
            .collect();
        found.push(emitted);
    }
    assert_eq!(found.len(), 1, "rule must determine a unique partition");
    found.pop().unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs: Vec<Transcript> = (0..1000).map(|i| random_document(&mut rng, i, 12)).collect();
    let mut cases = 0;
    let mut instances = 0;
    for doc in &docs {
        for &m in &SWEEP_MIN_LENGTHS {
            for keep in [true, false] {
                let cfg = MinLengthConfig {
                    min_length: m,
                    keep_trailing_combined: keep,
                };
                let got = build_instances(doc, cfg).map_err(|e| e.to_string())?;
                let want = brute_force(doc, m, keep);
                let got_view: Expected = got
                    .iter()
                    .map(|i| (i.source_turn_indices.clone(), i.word_count, i.text.clone()))
                    .collect();
                ensure(got_view == want, || format!("{} at min_length {m} (keep {keep}) differs", doc.doc_id))?;
                for i in &got {
                    let id = format!("{}:{}", doc.doc_id, i.source_turn_indices[0]);
                    ensure(i.instance_id == id && Some(i.label) == doc.label, || {
                        format!("{} has wrong id or label", i.instance_id)
                    })?;
                }
                cases += 1;
                instances += got.len();
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{cases} document x length x trailing-rule cases, {instances} instances, exact, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid: Vec<usize> = (0..=300).step_by(5).collect();
    for i in 0..1000 {
        let doc = random_document(&mut rng, i, 40);
        for lengths in [&SWEEP_MIN_LENGTHS[..], &grid[..]] {
            let mut counts = Vec::new();
            for &m in lengths {
                let n = build_instances(&doc, MinLengthConfig::new(m)).map_err(|e| e.to_string())?.len();
                ensure(counts.last().is_none_or(|&(_, prev)| n <= prev), || {
                    format!("{}: count rises to {n} at min_length {m}: {counts:?}", doc.doc_id)
                })?;
                counts.push((m, n));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "1000 documents over lengths {SWEEP_MIN_LENGTHS:?} and a 0..300 step-5 grid, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_3() -> Check {
    let (mean, std) = aggregate_folds(&[60.67, 68.54, 51.69, 61.80, 55.06]).map_err(|e| e.to_string())?;
    ensure((mean - 59.55).abs() <= 0.01 && (std - 5.82).abs() <= 0.01, || {
        format!("got ({mean:.4}, {std:.4})")
    })?;
    Ok(format!("mean {mean:.4}, population std {std:.4}"))
}

fn criterion_4() -> Check {
    let counts = PerLabel([22usize, 12, 55]);
    let dist = ClassDistribution::from_counts(counts);
    let pct = dist.proportions.map(|p| 100.0 * p);
    for (l, want) in [(Avoidant, 24.72), (Secure, 13.48), (Preoccupied, 61.80)] {
        ensure((pct[l] - want).abs() <= 0.01, || format!("{l} share {:.4}% != {want}%", pct[l]))?;
    }
    // 3 of 22 avoidant, 5 of 12 secure and 52 of 55 preoccupied correct;
    // errors go to preoccupied (avoidant) and secure (the rest).
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for (label, n, correct, wrong) in [
        (Avoidant, 22, 3, Preoccupied),
        (Secure, 12, 5, Preoccupied),
        (Preoccupied, 55, 52, Secure),
    ] {
        for i in 0..n {
            gold.push(label);
            pred.push(if i < correct { label } else { wrong });
        }
    }
    let cm = confusion(&gold, &pred).map_err(|e| e.to_string())?;
    let m = metrics(&cm).map_err(|e| e.to_string())?;
    let recall_a = 100.0 * m.recall[Avoidant];
    let acc = 100.0 * m.accuracy;
    ensure(cm.total() == 89 && cm.trace() == 60, || format!("constructed set wrong: {cm:?}"))?;
    ensure((recall_a - 13.64).abs() <= 0.01, || format!("avoidant recall {recall_a:.4}%"))?;
    ensure((acc - 67.42).abs() <= 0.01, || format!("accuracy {acc:.4}%"))?;
    Ok(format!(
        "shares {:.2}/{:.2}/{:.2}%, avoidant recall {recall_a:.2}%, accuracy {acc:.2}%",
        pct[Avoidant], pct[Secure], pct[Preoccupied]
    ))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let docs: Vec<Transcript> = AttachmentLabel::ALL
        .into_iter()
        .zip([20, 24, 34])
        .flat_map(|(l, n)| {
            (0..n).map(move |i| Transcript::from_turns(format!("{}{i}", l.short()), Some(l), [(Speaker::Patient, "x")]))
        })
        .collect();
    let corpus = Corpus::new(docs).map_err(|e| e.to_string())?;
    let labels = corpus.labels().map_err(|e| e.to_string())?;
    let seeds = 0..500u64;
    for seed in seeds.clone() {
        let plan = stratified_split(&corpus, 12, seed).map_err(|e| e.to_string())?;
        let mut got = PerLabel([0usize; 3]);
        for id in &plan.test_doc_ids {
            got[labels[id]] += 1;
        }
        ensure(got == PerLabel([3, 4, 5]), || format!("seed {seed}: {got:?}"))?;
        ensure(plan.train_doc_ids.len() == 66, || format!("seed {seed}: train size"))?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{{A:3, S:4, P:5}} for seeds {seeds:?}, {:.2?}", start.elapsed()))
}

/// Plurality, then largest probability sum, then label order.
fn vote_oracle(votes: &[usize], probs: &[[u32; 3]]) -> usize {
    let mut best = 0;
    let key = |l: usize| {
        let count = votes.iter().filter(|&&v| v == l).count();
        let sum: u32 = probs.iter().map(|p| p[l]).sum();
        (count, sum)
    };
    for l in 1..3 {
        if key(l) > key(best) {
            best = l;
        }
    }
    best
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    let mut ties = 0;
    // Probabilities are multiples of 1/64, so sums are exact in any order.
    let random_probs = |rng: &mut ChaCha8Rng, vote: usize, exact: bool| -> [u32; 3] {
        if exact {
            let mut p = [16, 16, 16];
            p[vote] = 32;
            return p;
        }
        let a = rng.random_range(0..=64u32);
        let b = rng.random_range(0..=64 - a);
        let mut p = [a, b, 64 - a - b];
        p.sort_unstable();
        // keep the voted label the most probable
        let mut out = [p[0], p[1], p[1]];
        out[vote] = p[2];
        let others: Vec<usize> = (0..3).filter(|&l| l != vote).collect();
        out[others[0]] = p[0];
        out[others[1]] = p[1];
        out
    };
    for code in 0..243usize {
        let votes: Vec<usize> = (0..5).map(|i| code / 3usize.pow(i) % 3).collect();
        let mut counts = [0; 3];
        for &v in &votes {
            counts[v] += 1;
        }
        let is_221 = {
            let mut c = counts;
            c.sort_unstable();
            c == [1, 2, 2]
        };
        let trials = if is_221 { 40 } else { 4 };
        for trial in 0..trials {
            let exact = trial == 0;
            let probs: Vec<[u32; 3]> = votes.iter().map(|&v| random_probs(&mut rng, v, exact)).collect();
            let models: Vec<Vec<Prediction>> = votes
                .iter()
                .zip(&probs)
                .map(|(&v, p)| {
                    vec![Prediction {
                        instance_id: "x".into(),
                        probabilities: PerLabel(p.map(|q| q as f64 / 64.0)),
                        predicted: AttachmentLabel::ALL[v],
                    }]
                })
                .collect();
            let got = majority_vote(&models).map_err(|e| e.to_string())?[0].winner.index();
            let want = vote_oracle(&votes, &probs);
            ensure(got == want, || format!("votes {votes:?} probs {probs:?}: got {got}, want {want}"))?;
            checked += 1;
            if is_221 {
                ties += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "all 243 ordered 5-vote tuples (21 multisets), {checked} cases incl. {ties} 2-2-1 ties, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_7() -> Check {
    let texts: Vec<String> = (0..100).map(|i| format!("text number {i}")).collect();
    let cfg = MLMConfig {
        holdout_fraction: 0.20,
        duplication_factor: 4,
        ..MLMConfig::new(7)
    };
    let data = prepare_mlm_data(&texts, &cfg).map_err(|e| e.to_string())?;
    ensure(data.holdout.len() == 20 && data.train.len() == 400, || {
        format!("{} holdout / {} train", data.holdout.len(), data.train.len())
    })?;
    let leaked = data.holdout.iter().filter(|h| data.train.contains(h)).count();
    ensure(leaked == 0, || format!("{leaked} holdout texts also in training"))?;
    Ok("20 holdout texts, 400 training entries (80 unique x 5)".into())
}

fn experiment(dir: &Path, strength: f64, extra: serde_json::Value) -> Result<ExperimentOutcome, String> {
    let corpus = dir.join("corpus.jsonl");
    generate_corpus(&SynthConfig::new(2024).with_marker_strength(strength))
        .map_err(|e| e.to_string())?
        .save(&corpus)
        .map_err(|e| e.to_string())?;
    let mut v = json!({
        "corpus": corpus,
        "output_dir": dir.join("run"),
        "seed": 17,
        "min_lengths": [50],
        "split": {"test_count": 12, "k": 5},
        "train": {"learning_rate": 1e-3},
    });
    for (k, val) in extra.as_object().expect("object") {
        v[k] = val.clone();
    }
    let cfg = ExperimentConfig::from_value(v).map_err(|e| e.to_string())?;
    run_experiment(&cfg, 1).map(|r| r.0).map_err(|e| e.to_string())
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let hi_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let lo_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let hi = experiment(hi_dir.path(), 1.0, json!({}))?;
    let lo = experiment(lo_dir.path(), 0.0, json!({}))?;
    let (a_hi, a_lo) = (hi.lengths[0].vote.accuracy, lo.lengths[0].vote.accuracy);
    ensure(a_hi >= 0.90, || format!("marker 1.0 vote accuracy {a_hi:.4} < 0.90"))?;
    ensure(a_lo <= 0.45, || format!("marker 0.0 vote accuracy {a_lo:.4} > 0.45"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "vote accuracy {a_hi:.4} at marker 1.0 ({} test instances), {a_lo:.4} at marker 0.0, {:.2?}",
        hi.lengths[0].n_test_instances,
        start.elapsed()
    ))
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = experiment(
        dir.path(),
        1.0,
        json!({
            "backend": {"name": "tiny-transformer"},
            "train": {"learning_rate": 1e-3, "epochs": 4},
            "mlm": {"epochs": 3, "learning_rate": 1e-3},
        }),
    )?;
    let acc = out.lengths[0].vote.accuracy;
    ensure(acc >= 0.90, || format!("vote accuracy {acc:.4} < 0.90"))?;
    within(start.elapsed(), Duration::from_secs(15 * 60))?;
    Ok(format!(
        "pretrained then fine-tuned tiny transformer: vote accuracy {acc:.4}, best DAPT perplexity {:.2}, {:.2?}",
        out.dapt_perplexity.unwrap_or(f64::NAN),
        start.elapsed()
    ))
}

fn criterion_10() -> Check {
    let c = CostMatrix::default();
    c.validate().map_err(|e| e.to_string())?;
    let cost = |g, p| c.cost(g, p);
    let secure_from = cost(Secure, Avoidant).max(cost(Secure, Preoccupied));
    ensure(
        secure_from < cost(Avoidant, Secure)
            && cost(Avoidant, Secure) < cost(Preoccupied, Secure)
            && cost(Preoccupied, Secure) < cost(Avoidant, Preoccupied)
            && cost(Avoidant, Preoccupied) == cost(Preoccupied, Avoidant),
        || format!("ordering violated: {:?}", c.costs),
    )?;
    ensure(c.satisfies_severity_ordering(), || "ordering helper disagrees".into())?;
    let secure_involved = [(Secure, Avoidant), (Secure, Preoccupied), (Avoidant, Secure), (Preoccupied, Secure)];
    let insecure = [(Avoidant, Preoccupied), (Preoccupied, Avoidant)];
    let mut comparisons = 0;
    for k in 1..=10u64 {
        let with_errors = |(g, p): (AttachmentLabel, AttachmentLabel)| {
            let mut cm = ConfusionMatrix::default();
            for l in AttachmentLabel::ALL {
                cm.counts[l.index()][l.index()] = 20;
            }
            cm.counts[g.index()][p.index()] += k;
            cm.counts[g.index()][g.index()] -= k;
            cm
        };
        for &bad in &insecure {
            let worse = cost_score(&with_errors(bad), &c).map_err(|e| e.to_string())?;
            ensure((worse - 4.0 * k as f64 / 60.0).abs() < 1e-12, || format!("cost_score formula: {worse}"))?;
            for &mild in &secure_involved {
                let better = cost_score(&with_errors(mild), &c).map_err(|e| e.to_string())?;
                ensure(worse > better, || format!("{bad:?} x{k} not worse than {mild:?} x{k}"))?;
                comparisons += 1;
            }
        }
    }
    Ok(format!("ordering holds; {comparisons} equal-count comparisons strictly ranked"))
}

fn criterion_11() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.jsonl");
    generate_corpus(&SynthConfig::new(99).with_marker_strength(0.4))
        .map_err(|e| e.to_string())?
        .save(&corpus)
        .map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::from_value(json!({
        "corpus": corpus,
        "output_dir": dir.path().join("first"),
        "seed": 5,
        "min_lengths": [0, 50, 150],
        "train": {"learning_rate": 1e-3, "epochs": 4},
    }))
    .map_err(|e| e.to_string())?;
    let (_, manifest) = run_experiment(&cfg, 1).map_err(|e| e.to_string())?;
    let (rerun, same) = rerun_manifest(&manifest, &dir.path().join("second"), 3).map_err(|e| e.to_string())?;
    ensure(same && rerun.metrics == manifest.metrics, || "metrics differ on rerun".into())?;
    ensure(rerun.outputs.values().map(|f| &f.sha256).eq(manifest.outputs.values().map(|f| &f.sha256)), || {
        "output files differ on rerun".into()
    })?;
    Ok(format!(
        "metrics bit-exact and {} output files byte-identical across a rerun with different --jobs",
        manifest.outputs.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("concatenation matches brute-force oracle", criterion_1),
        ("instance count non-increasing in min_length", criterion_2),
        ("fold aggregate reproduces (59.55, 5.82)", criterion_3),
        ("test-set reconstruction: recall 13.64%, accuracy 67.42%", criterion_4),
        ("stratified split quotas {3,4,5}", criterion_5),
        ("majority vote matches exhaustive rule", criterion_6),
        ("MLM data preparation 20/400", criterion_7),
        ("synthetic pipeline, reference backend", criterion_8),
        ("synthetic pipeline, tiny transformer with DAPT", criterion_9),
        ("clinical cost ordering", criterion_10),
        ("manifest rerun is bit-exact", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
