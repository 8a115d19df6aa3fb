//! Synthetic corpora with known structure, for oracle tests and demos.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Domain, Instance, Label, Split};

fn words(rng: &mut ChaCha8Rng, prefix: &str, vocab: usize, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| format!("{prefix}{}", rng.gen_range(0..vocab)))
        .collect()
}

/// Two-vocabulary benchmark: the target speaks vocabulary A only, the source
/// mixes A-instances and B-instances drawn with the same length distribution.
#[derive(Clone, Debug)]
pub struct VocabBenchmark {
    pub target: Corpus,
    pub source: Corpus,
    /// Uids of the source instances written in vocabulary A.
    pub in_domain: Vec<String>,
}

pub fn vocab_benchmark(
    n_target: usize,
    n_source_a: usize,
    n_source_b: usize,
    seed: u64,
) -> VocabBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |uid: String, prefix: &str, domain: Domain, i: usize| {
        let p_len = rng.gen_range(6..=14);
        let h_len = rng.gen_range(4..=10);
        let label = if i.is_multiple_of(2) {
            Label::Entailment
        } else {
            Label::NotEntailment
        };
        Instance::new(
            uid,
            words(&mut rng, prefix, 60, p_len).join(" "),
            words(&mut rng, prefix, 60, h_len).join(" "),
            label,
        )
        .with_domain(domain)
    };
    let target: Vec<Instance> = (0..n_target)
        .map(|i| make(format!("t{i:04}"), "a", Domain::Target, i))
        .collect();
    let mut source: Vec<Instance> = Vec::with_capacity(n_source_a + n_source_b);
    for i in 0..n_source_a {
        source.push(make(format!("sa{i:04}"), "a", Domain::Source, i));
    }
    for i in 0..n_source_b {
        source.push(make(format!("sb{i:04}"), "b", Domain::Source, i));
    }
    source.shuffle(&mut rng);
    let in_domain = source
        .iter()
        .filter(|i| i.uid.starts_with("sa"))
        .map(|i| i.uid.clone())
        .collect();
    VocabBenchmark {
        target: Corpus::new("vocab-target", target),
        source: Corpus::new("vocab-source", source),
        in_domain,
    }
}

/// How a source instance of the shift benchmark relates to the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Drawn from the target distribution.
    Matched,
    /// Target filler text with keywords the target never uses.
    OtherTopic,
    /// Off-domain filler, target keywords, inverted label rule.
    Flipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftParams {
    pub target_train: usize,
    pub target_validation: usize,
    pub target_test: usize,
    pub source: usize,
    /// Fractions of matched and other-topic source instances; the rest is
    /// flipped off-domain data.
    pub matched_fraction: f64,
    pub other_topic_fraction: f64,
    pub keywords: usize,
}

impl Default for ShiftParams {
    fn default() -> Self {
        ShiftParams {
            target_train: 40,
            target_validation: 200,
            target_test: 400,
            source: 2000,
            matched_fraction: 0.1,
            other_topic_fraction: 0.6,
            keywords: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShiftBenchmark {
    /// Target instances tagged with train, validation and test splits.
    pub target: Corpus,
    pub source: Corpus,
    pub kinds: HashMap<String, SourceKind>,
}

/// NLI data whose label is decided by a keyword: the premise carries one
/// keyword, and the pair is entailment exactly when the hypothesis repeats
/// it (otherwise the hypothesis names a different keyword). Flipped source
/// instances invert that rule, so they teach the wrong decision on target
/// keywords; other-topic instances use keywords the target never sees.
pub fn shift_benchmark(params: &ShiftParams, seed: u64) -> ShiftBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_kw = params.keywords.max(2);
    let mut make = |uid: String, kw: &str, filler: &str, flipped: bool, i: usize| {
        let entail = i.is_multiple_of(2);
        let kp = rng.gen_range(0..n_kw);
        let kh = if entail != flipped {
            kp
        } else {
            (kp + rng.gen_range(1..n_kw)) % n_kw
        };
        let len = rng.gen_range(6..=10);
        let mut premise = words(&mut rng, &format!("{filler}p"), 80, len);
        let at = rng.gen_range(0..=premise.len());
        premise.insert(at, format!("{kw}{kp}"));
        let len = rng.gen_range(4..=7);
        let mut hypothesis = words(&mut rng, &format!("{filler}h"), 80, len);
        let at = rng.gen_range(0..=hypothesis.len());
        hypothesis.insert(at, format!("{kw}{kh}"));
        let label = if entail {
            Label::Entailment
        } else {
            Label::NotEntailment
        };
        Instance::new(uid, premise.join(" "), hypothesis.join(" "), label)
    };

    let mut target = Vec::new();
    for (split, n) in [
        (Split::Train, params.target_train),
        (Split::Validation, params.target_validation),
        (Split::Test, params.target_test),
    ] {
        for i in 0..n {
            target.push(
                make(format!("t-{split}-{i:04}"), "kw", "t", false, i)
                    .with_domain(Domain::Target)
                    .with_split(split),
            );
        }
    }

    let n_matched = (params.source as f64 * params.matched_fraction).round() as usize;
    let n_other = (params.source as f64 * params.other_topic_fraction).round() as usize;
    let n_flipped = params.source.saturating_sub(n_matched + n_other);
    let mut source = Vec::with_capacity(params.source);
    let mut kinds = HashMap::new();
    for (kind, n, kw, filler, flipped) in [
        (SourceKind::Matched, n_matched, "kw", "t", false),
        (SourceKind::OtherTopic, n_other, "qx", "t", false),
        (SourceKind::Flipped, n_flipped, "kw", "o", true),
    ] {
        for i in 0..n {
            let uid = format!("s{}", source.len());
            kinds.insert(uid.clone(), kind);
            source.push(make(uid, kw, filler, flipped, i).with_domain(Domain::Source));
        }
    }
    source.shuffle(&mut rng);
    ShiftBenchmark {
        target: Corpus::new("shift-target", target),
        source: Corpus::new("shift-source", source),
        kinds,
    }
}
