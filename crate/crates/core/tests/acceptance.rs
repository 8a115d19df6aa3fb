//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xds_core::corpus::{build_pairs, render_prompt, Corpus, Instance, Label, PromptMode, Split};
use xds_core::embedding::{score_embedding, Aggregator, EmbeddingStore};
use xds_core::importance::{
    importance_weights, score_importance, train_domain_classifier, Featurizer,
};
use xds_core::lm::{train_lm, NgramModel, BOS, UNK};
use xds_core::moore_lewis::{score_moore_lewis, train_domain_lms};
use xds_core::overlap::{jaccard, rouge_l};
use xds_core::pipeline::{ScoreInputs, ScorerConfig};
use xds_core::score::{by_rank, ranked, Method, Orientation, ScoreRecord};
use xds_core::selection::{select_random, select_top, RATIO_GRID};
use xds_core::sgd::SgdConfig;
use xds_core::synth::{shift_benchmark, vocab_benchmark, ShiftParams, VocabBenchmark};
use xds_core::textproc::{tokenize, FeatureConfig, TokenSeq};
use xds_core::transfer::{run_sweep, sign_test_p, Confusion, SweepConfig, FULL};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(
        elapsed < limit,
        format!("took {elapsed:?}, limit {limit:?}"),
    )
}

fn c1_reference_overlap() -> Outcome {
    let start = Instant::now();
    let rows = [
        (
            "Inactive session are shut down after a defined period of inactivity.",
            "Automatic logoff. Implement electronic procedures that terminate an electronic session after a predetermined time of inactivity.",
            0.2381,
            0.3704,
        ),
        (
            "An Incident may include but not be limited to:",
            "Patient information may include (but is not limited to) historical patient documentation and test results.",
            0.3529,
            0.5000,
        ),
    ];
    let mut detail = Vec::new();
    for (i, (src, tgt, j_ref, r_ref)) in rows.iter().enumerate() {
        let j = jaccard(src, tgt);
        let r = rouge_l(src, tgt);
        check(
            (j - j_ref).abs() <= 1e-4,
            format!("row {} jaccard {j:.6} vs {j_ref}", i + 1),
        )?;
        check(
            (r - r_ref).abs() <= 1e-4,
            format!("row {} rouge-l {r:.6} vs {r_ref}", i + 1),
        )?;
        detail.push(format!("row{} J={j:.4} R={r:.4}", i + 1));
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(detail.join(", "))
}

fn c2_lm_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let docs: Vec<TokenSeq> = (0..300)
        .map(|_| {
            let n = rng.gen_range(1..12);
            tokenize(
                &(0..n)
                    .map(|_| vocab.choose(&mut rng).unwrap().as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
            )
        })
        .collect();
    let lm = train_lm(&docs, 3, 0.5).map_err(|e| e.to_string())?;
    let outcomes = lm.outcomes();
    check(
        outcomes.len() == lm.vocab_size() + 1,
        "outcomes must be vocab plus UNK",
    )?;
    let mut pool: Vec<&str> = vocab.iter().map(String::as_str).collect();
    pool.extend([BOS, UNK, "never-seen"]);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let ctx = [
            *pool.choose(&mut rng).unwrap(),
            *pool.choose(&mut rng).unwrap(),
        ];
        let total: f64 = outcomes.iter().map(|w| lm.prob(&ctx, w)).sum();
        worst = worst.max((total - 1.0).abs());
    }
    check(worst <= 1e-9, format!("normalization error {worst:e}"))?;

    let flat = NgramModel::untrained(3, 0.5, vocab.iter().map(String::as_str))
        .map_err(|e| e.to_string())?;
    let expected = ((flat.vocab_size() + 1) as f64).log2();
    let mut worst_h: f64 = 0.0;
    for doc in docs.iter().take(100) {
        worst_h = worst_h.max((flat.cross_entropy(doc) - expected).abs());
    }
    check(
        worst_h <= 1e-9,
        format!("pure-smoothing cross-entropy error {worst_h:e}"),
    )?;
    Ok(format!(
        "max |Σp-1| = {worst:.1e}, max |H-log2(V+1)| = {worst_h:.1e} (V = {})",
        flat.vocab_size()
    ))
}

fn top_share(records: &[ScoreRecord], fraction: f64, positives: &HashSet<&str>) -> f64 {
    let k = (records.len() as f64 * fraction) as usize;
    let top = by_rank(records);
    top[..k]
        .iter()
        .filter(|r| positives.contains(r.uid.as_str()))
        .count() as f64
        / k as f64
}

fn bench(seed: u64) -> VocabBenchmark {
    vocab_benchmark(200, 500, 500, seed)
}

fn c3_moore_lewis() -> Outcome {
    let start = Instant::now();
    let mut shares = Vec::new();
    for seed in 0..3 {
        let b = bench(seed);
        let a: HashSet<&str> = b.in_domain.iter().map(String::as_str).collect();
        let run = || {
            let (lt, ls) = train_domain_lms(&b.source, &b.target, 3, 0.5).unwrap();
            score_moore_lewis(&b.source, &lt, &ls)
        };
        let records = run();
        check(records == run(), "scores differ between identical runs")?;
        let share = top_share(&records, 0.10, &a);
        check(
            share >= 0.90,
            format!("seed {seed}: top-10% A share {share:.3} < 0.90"),
        )?;
        shares.push(format!("{share:.3}"));
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("top-10% A share per seed: {}", shares.join(", ")))
}

fn c4_importance() -> Outcome {
    let features = FeatureConfig::default();
    let sgd = SgdConfig {
        seed: 4,
        ..SgdConfig::default()
    };
    let mut shares = Vec::new();
    for seed in 0..3 {
        let b = bench(seed);
        let a: HashSet<&str> = b.in_domain.iter().map(String::as_str).collect();
        let clf =
            train_domain_classifier(&b.source, &b.target, Featurizer::Hashed(&features), &sgd)
                .map_err(|e| e.to_string())?;
        let weights = importance_weights(&clf, &b.source, Featurizer::Hashed(&features))
            .map_err(|e| e.to_string())?;
        let share = top_share(&score_importance(&weights), 0.10, &a);
        check(
            share >= 0.85,
            format!("seed {seed}: top-10% A share {share:.3} < 0.85"),
        )?;
        shares.push(format!("{share:.3}"));
    }

    let mut prior_detail = Vec::new();
    for (n_s, n_t) in [(100usize, 100usize), (300, 100), (100, 300)] {
        let base = bench(9).target;
        let pick = |n: usize, tag: &str| {
            Corpus::new(
                tag,
                (0..n)
                    .map(|i| {
                        let src = &base.instances[i % 10];
                        Instance::new(
                            format!("{tag}{i}"),
                            src.premise.clone(),
                            src.hypothesis.clone(),
                            src.label,
                        )
                    })
                    .collect(),
            )
        };
        // Ten distinct texts repeated, identical in both corpora.
        let source = pick(n_s, "s");
        let target = pick(n_t, "t");
        let clf = train_domain_classifier(&source, &target, Featurizer::Hashed(&features), &sgd)
            .map_err(|e| e.to_string())?;
        let prior = n_t as f64 / (n_s + n_t) as f64;
        let ws = importance_weights(&clf, &source, Featurizer::Hashed(&features))
            .map_err(|e| e.to_string())?;
        let worst = ws
            .iter()
            .map(|w| (w.posterior - prior).abs())
            .fold(0.0, f64::max);
        check(
            worst <= 0.05,
            format!("N_s={n_s}, N_t={n_t}: posterior off prior {prior:.3} by {worst:.3}"),
        )?;
        prior_detail.push(format!("{n_s}/{n_t}:{worst:.3}"));
    }
    Ok(format!(
        "top-10% A share {}; max |posterior-prior| {}",
        shares.join(", "),
        prior_detail.join(" ")
    ))
}

fn c5_embedding() -> Outcome {
    let mut shares = Vec::new();
    for seed in 0..3 {
        let mut b = bench(seed);
        let copies: Vec<Instance> = b.target.instances[..5]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Instance::new(
                    format!("copy{i}"),
                    t.premise.clone(),
                    t.hypothesis.clone(),
                    t.label,
                )
            })
            .collect();
        b.source.instances.extend(copies);
        let mut a: HashSet<&str> = b.in_domain.iter().map(String::as_str).collect();
        a.extend(["copy0", "copy1", "copy2", "copy3", "copy4"]);
        let store = EmbeddingStore::tfidf_fallback(&b.source, &b.target, 1 << 20)
            .map_err(|e| e.to_string())?;
        let records = score_embedding(&b.source, &b.target, &store, Aggregator::Max)
            .map_err(|e| e.to_string())?;
        check(
            records.iter().all(|r| (0.0..=1.0).contains(&r.score)),
            "scores outside [0, 1]",
        )?;
        let order = by_rank(&records);
        let first: HashSet<&str> = order[..5].iter().map(|r| r.uid.as_str()).collect();
        check(
            first == HashSet::from(["copy0", "copy1", "copy2", "copy3", "copy4"]),
            format!("seed {seed}: self-matches do not rank first: {first:?}"),
        )?;
        let share = top_share(&records, 0.10, &a);
        check(
            share >= 0.90,
            format!("seed {seed}: top-10% A share {share:.3} < 0.90"),
        )?;
        shares.push(format!("{share:.3}"));
    }
    Ok(format!(
        "top-10% A share {}; self-matches rank 1-5",
        shares.join(", ")
    ))
}

fn c6_selection_laws() -> Outcome {
    let percents: Vec<u64> = RATIO_GRID
        .iter()
        .map(|r| (r * 100.0).round() as u64)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 1..=1000usize {
        let records = ranked(
            (0..n).map(|i| (format!("u{i}"), rng.gen::<f64>())),
            Method::MooreLewis,
            Orientation::Asc,
        );
        let mut previous: Option<Vec<String>> = None;
        for (&ratio, &pct) in RATIO_GRID.iter().zip(&percents) {
            let m = select_top(&records, ratio).map_err(|e| e.to_string())?;
            let expected = ((pct as usize * n) / 100).max(1);
            check(
                m.len() == expected,
                format!("N={n} r={ratio}: {} selected, expected {expected}", m.len()),
            )?;
            if let Some(prev) = &previous {
                let cur: HashSet<&String> = m.selected.iter().collect();
                check(
                    prev.iter().all(|u| cur.contains(u)),
                    format!("N={n}: selection at {ratio} not nested"),
                )?;
            }
            previous = Some(m.selected);
        }
    }

    let corpus = Corpus::new(
        "c",
        (0..10)
            .map(|i| Instance::new(format!("u{i}"), "p", "h", Label::Entailment))
            .collect(),
    );
    let runs = 2000;
    let mut counts = BTreeMap::new();
    for seed in 0..runs {
        let m = select_random(&corpus, 0.5, seed).map_err(|e| e.to_string())?;
        check(
            m == select_random(&corpus, 0.5, seed).unwrap(),
            "random selection not reproducible",
        )?;
        for uid in m.selected {
            *counts.entry(uid).or_insert(0usize) += 1;
        }
    }
    let sigma = (0.25 / runs as f64).sqrt();
    let worst = counts
        .values()
        .map(|&c| (c as f64 / runs as f64 - 0.5).abs())
        .fold(0.0, f64::max);
    check(
        counts.len() == 10 && worst <= 3.0 * sigma,
        format!(
            "uniformity: max deviation {worst:.4} > 3σ = {:.4}",
            3.0 * sigma
        ),
    )?;
    Ok(format!(
        "N=1..1000 × 8 ratios sized and nested; random max deviation {worst:.4} ≤ {:.4}",
        3.0 * sigma
    ))
}

fn c7_negative_pairs() -> Outcome {
    // Ten hypotheses, each matching one of ten premises, plus an irregular
    // block where one hypothesis matches two premises.
    let mut positives: Vec<Instance> = (0..10)
        .map(|i| {
            Instance::new(
                format!("h{i}"),
                format!("premise {i}"),
                format!("hypothesis {i}"),
                Label::Entailment,
            )
        })
        .collect();
    positives.push(Instance::new(
        "h9b",
        "premise 10",
        "hypothesis 9",
        Label::Entailment,
    ));
    let corpus = Corpus::new("pos", positives);
    // Unique hypotheses 10, unique premises 11; hypothesis 9 matches two.
    let expected_all = 9 * 10 + 9;

    let zero = build_pairs(&corpus, 0.0, 1).map_err(|e| e.to_string())?;
    check(
        zero.instances == corpus.instances,
        "rate 0 changed the corpus",
    )?;
    let all = build_pairs(&corpus, 1.0, 1).map_err(|e| e.to_string())?;
    let negatives = all.len() - corpus.len();
    check(
        negatives == expected_all,
        format!("rate 1 gave {negatives} negatives, expected {expected_all}"),
    )?;
    check(
        all.instances[corpus.len()..]
            .iter()
            .all(|i| i.label == Label::NotEntailment),
        "rate 1 produced a non-negative extra",
    )?;

    let seeds = 1000u64;
    let total: usize = (0..seeds)
        .map(|s| build_pairs(&corpus, 0.1, s).unwrap().len() - corpus.len())
        .sum();
    let mean = total as f64 / seeds as f64;
    let expect = 0.1 * expected_all as f64;
    let sigma = (expected_all as f64 * 0.1 * 0.9 / seeds as f64).sqrt();
    check(
        (mean - expect).abs() <= 3.0 * sigma,
        format!(
            "rate 0.1 mean {mean:.4}, expected {expect} ± {:.4}",
            3.0 * sigma
        ),
    )?;
    Ok(format!(
        "rate 1: {negatives} negatives; rate 0.1 mean {mean:.3} vs {expect:.1} ± {:.3}",
        3.0 * sigma
    ))
}

fn c8_transfer() -> Outcome {
    let start = Instant::now();
    let bench = shift_benchmark(&ShiftParams::default(), 8);
    let config = SweepConfig {
        methods: vec![Method::MooreLewis, Method::Importance, Method::Random],
        ratios: vec![0.05],
        seeds: (0..20).collect(),
        scorer: ScorerConfig {
            features: FeatureConfig::new([1, 2], 1 << 18).unwrap(),
            ..ScorerConfig::default()
        },
        ..SweepConfig::default()
    };
    let result = run_sweep(
        &bench.target,
        &bench.source,
        &config,
        ScoreInputs::default(),
    )
    .map_err(|e| e.to_string())?;
    let mean = |m: &str, r: f64| result.mean_micro_f1(m, r, Split::Test).unwrap();
    let random = result.per_seed("random", 0.05, Split::Test);
    let mut detail = Vec::new();
    for method in ["moore_lewis", "importance"] {
        let cells = result.per_seed(method, 0.05, Split::Test);
        let wins = cells.iter().zip(&random).filter(|(a, b)| a.1 > b.1).count();
        let losses = cells.iter().zip(&random).filter(|(a, b)| a.1 < b.1).count();
        let p = sign_test_p(wins, losses);
        check(
            mean(method, 0.05) > mean("random", 0.05),
            format!("{method} mean not above random"),
        )?;
        check(
            p < 0.05,
            format!("{method}: sign test {wins}/{losses} p = {p:.4}"),
        )?;
        detail.push(format!(
            "{method} {:.3} ({wins}-{losses}, p={p:.1e})",
            mean(method, 0.05)
        ));
    }
    let best = mean("moore_lewis", 0.05)
        .max(mean("importance", 0.05))
        .max(mean("random", 0.05));
    let full = mean(FULL, 1.0);
    check(
        full < best,
        format!("full {full:.3} not below best 5% selection {best:.3}"),
    )?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "test micro-F1 @5%: {}, random {:.3}; full {full:.3} < best {best:.3}",
        detail.join(", "),
        mean("random", 0.05)
    ))
}

fn c9_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let classes = [Label::Entailment, Label::NotEntailment];
    for set in 0..1000 {
        let n = rng.gen_range(1..300);
        let p_pos = rng.gen::<f64>();
        let pairs: Vec<(Label, Label)> = (0..n)
            .map(|_| {
                let actual = if rng.gen::<f64>() < 0.5 {
                    Label::Entailment
                } else {
                    Label::NotEntailment
                };
                let predicted = if rng.gen::<f64>() < p_pos {
                    Label::Entailment
                } else {
                    Label::NotEntailment
                };
                (predicted, actual)
            })
            .collect();
        let c = Confusion::from_labels(pairs.iter().copied());
        let accuracy = pairs.iter().filter(|(p, a)| p == a).count() as f64 / n as f64;
        check(
            (c.micro_f1() - accuracy).abs() <= 1e-12,
            format!("set {set}: micro-F1 != accuracy"),
        )?;

        // Brute-force oracle over an explicit 2x2 matrix.
        let mut matrix = [[0usize; 2]; 2];
        for (p, a) in &pairs {
            let pi = classes.iter().position(|c| c == p).unwrap();
            let ai = classes.iter().position(|c| c == a).unwrap();
            matrix[pi][ai] += 1;
        }
        let safe = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let (tp, fp, fn_) = (matrix[0][0], matrix[0][1], matrix[1][0]);
        let precision = safe(tp, tp + fp);
        let recall = safe(tp, tp + fn_);
        let diag: usize = (0..2).map(|i| matrix[i][i]).sum();
        let off: usize = n - diag;
        let micro = safe(2 * diag, 2 * diag + 2 * off);
        let class_f1 = |i: usize| {
            let tp = matrix[i][i];
            let fp: usize = (0..2).filter(|&j| j != i).map(|j| matrix[i][j]).sum();
            let fn_: usize = (0..2).filter(|&j| j != i).map(|j| matrix[j][i]).sum();
            safe(2 * tp, 2 * tp + fp + fn_)
        };
        let macro_f1 = (class_f1(0) + class_f1(1)) / 2.0;
        for (name, got, want) in [
            ("precision", c.precision(), precision),
            ("recall", c.recall(), recall),
            ("micro-F1", c.micro_f1(), micro),
            ("macro-F1", c.macro_f1(), macro_f1),
        ] {
            check(
                (got - want).abs() <= 1e-12,
                format!("set {set}: {name} {got} vs oracle {want}"),
            )?;
        }
        check(c.total() == n, "confusion counts do not sum to n")?;
    }
    Ok("1000 random prediction sets agree with the brute-force oracle".into())
}

fn c10_prompts() -> Outcome {
    let inst = Instance::new(
        "x",
        "The controller shall notify breaches.",
        "We report breaches within 72 hours.",
        Label::Entailment,
    );
    let pos = Instance::new(
        "p",
        "Data must be encrypted.",
        "All data is encrypted at rest.",
        Label::Entailment,
    );
    let neg = Instance::new(
        "n",
        "Logs are kept for a year.",
        "We delete logs daily.",
        Label::NotEntailment,
    );

    let zero_expected = "Below is a Natural Language Inference (NLI) task for compliance detection in GDPR domain.\n\
give an answer in either 'entailment' or 'not entailment'\n\
Premise: The controller shall notify breaches.\n\
Hypothesis: We report breaches within 72 hours.\n\
Answer:";
    let one_expected = "Below is a Natural Language Inference (NLI) task for compliance detection in the HIPAA domain.\n\
\n\
Example 1:\n\
Premise: Data must be encrypted.\n\
Hypothesis: All data is encrypted at rest.\n\
Answer: entailment\n\
\n\
Example 2:\n\
Premise: Logs are kept for a year.\n\
Hypothesis: We delete logs daily.\n\
Answer: not entailment\n\
\n\
Premise: The controller shall notify breaches.\n\
Hypothesis: We report breaches within 72 hours.\n\
Answer:";
    let zero = render_prompt(&inst, "GDPR", PromptMode::ZeroShot, None, None)
        .map_err(|e| e.to_string())?;
    let one = render_prompt(&inst, "HIPAA", PromptMode::OneShot, Some(&pos), Some(&neg))
        .map_err(|e| e.to_string())?;
    check(zero == zero_expected, format!("zero-shot differs:\n{zero}"))?;
    check(one == one_expected, format!("one-shot differs:\n{one}"))?;
    Ok(format!(
        "zero-shot {} bytes, one-shot {} bytes identical",
        zero.len(),
        one.len()
    ))
}

fn strip_timestamps(bytes: &[u8]) -> Vec<u8> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"created_at\""))
        .map(|l| l.trim_end_matches(',').to_string())
        .collect::<Vec<_>>()
        .join("\n")
        .into_bytes()
}

fn run_pipeline(root: &Path, out: &str, jobs: &str) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_xds");
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "ingest",
            "--input",
            "data/source.jsonl",
            "--out",
            "OUT/ingested.jsonl",
            "--stats",
            "OUT/stats.json",
        ],
        vec![
            "pairs",
            "--input",
            "data/positives.jsonl",
            "--out",
            "OUT/pairs.jsonl",
        ],
        vec![
            "score",
            "--method",
            "moore-lewis",
            "--out",
            "OUT/ml.jsonl",
            "--histogram",
            "OUT/ml.csv",
        ],
        vec![
            "score",
            "--method",
            "importance",
            "--out",
            "OUT/iw.jsonl",
            "--weights-out",
            "OUT/w.jsonl",
        ],
        vec!["score", "--method", "embedding", "--out", "OUT/emb.jsonl"],
        vec!["score", "--method", "random", "--out", "OUT/rnd.jsonl"],
        vec![
            "select",
            "--scores",
            "OUT/ml.jsonl",
            "--ratio",
            "0.05",
            "--out",
            "OUT/man.json",
            "--materialize",
            "OUT/sel.jsonl",
        ],
        vec![
            "select",
            "--method",
            "random",
            "--ratio",
            "0.1",
            "--out",
            "OUT/rman.json",
        ],
        vec![
            "select",
            "--weights",
            "OUT/w.jsonl",
            "--threshold",
            "1.0",
            "--out",
            "OUT/tman.json",
        ],
        vec![
            "diagnose",
            "--scores",
            "OUT/ml.jsonl",
            "--out",
            "OUT/ov.csv",
            "--aggregate-out",
            "OUT/agg.csv",
        ],
        vec![
            "eval",
            "--selection",
            "OUT/man.json",
            "--out",
            "OUT/eval.json",
        ],
        vec![
            "sweep",
            "--ratios",
            "0.05,0.2",
            "--seeds",
            "1,2",
            "--out",
            "OUT/sweep.csv",
            "--summary-out",
            "OUT/sum.csv",
            "--svg",
            "OUT/fig",
        ],
        vec![
            "--prompt-mode",
            "one-shot",
            "prompt",
            "--input",
            "data/target.jsonl",
            "--out",
            "OUT/prompts.jsonl",
        ],
    ];
    for step in steps {
        let args: Vec<String> = step.iter().map(|a| a.replace("OUT", out)).collect();
        let status = Command::new(bin)
            .current_dir(root)
            .args([
                "--jobs",
                jobs,
                "--seed",
                "11",
                "--source",
                "data/source.jsonl",
                "--target",
                "data/target.jsonl",
            ])
            .args([
                "--feature-dim",
                "65536",
                "--embedding-dim",
                "65536",
                "--proxy-feature-dim",
                "65536",
            ])
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "{:?} failed: {}",
                step,
                String::from_utf8_lossy(&status.stderr)
            ));
        }
    }
    Ok(())
}

fn c11_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let bin = env!("CARGO_BIN_EXE_xds");
    let gen = Command::new(bin)
        .current_dir(root)
        .args([
            "--seed",
            "5",
            "synth",
            "--kind",
            "shift",
            "--out-dir",
            "data",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    check(
        gen.status.success(),
        String::from_utf8_lossy(&gen.stderr).to_string(),
    )?;
    let target =
        std::fs::read_to_string(root.join("data/target.jsonl")).map_err(|e| e.to_string())?;
    let positives: String = target
        .lines()
        .filter(|l| l.contains("\"label\":\"entailment\""))
        .map(|l| format!("{l}\n"))
        .collect();
    check(
        !positives.is_empty(),
        "no entailment lines in synthetic target",
    )?;
    std::fs::write(root.join("data/positives.jsonl"), positives).map_err(|e| e.to_string())?;
    run_pipeline(root, "a", "1")?;
    run_pipeline(root, "b", "4")?;

    let mut files: Vec<PathBuf> = std::fs::read_dir(root.join("a"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    for a in &files {
        let name = a.file_name().unwrap();
        let b = root.join("b").join(name);
        let (ba, bb) = (
            std::fs::read(a).map_err(|e| e.to_string())?,
            std::fs::read(&b).map_err(|e| e.to_string())?,
        );
        check(
            strip_timestamps(&ba) == strip_timestamps(&bb),
            format!(
                "{} differs between --jobs 1 and --jobs 4",
                name.to_string_lossy()
            ),
        )?;
    }
    check(
        files.len() >= 30,
        format!("only {} artifacts produced", files.len()),
    )?;
    Ok(format!(
        "{} artifacts byte-identical across --jobs 1 / 4",
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 reference overlap values", c1_reference_overlap),
        ("2 LM normalization", c2_lm_normalization),
        ("3 Moore-Lewis oracle recovery", c3_moore_lewis),
        ("4 importance-weighting oracle recovery", c4_importance),
        ("5 embedding-selector oracle recovery", c5_embedding),
        ("6 selection laws", c6_selection_laws),
        ("7 negative-pair construction", c7_negative_pairs),
        ("8 protocol-level transfer claim", c8_transfer),
        ("9 metric identities", c9_metrics),
        ("10 prompt fidelity", c10_prompts),
        ("11 reproducibility", c11_reproducibility),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{ms} ms]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{ms} ms]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
