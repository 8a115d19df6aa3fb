//! Lexical-overlap diagnostics between source and target instances.
//!
//! All metrics run on [`tokenize`] output, so they ignore case and edge
//! punctuation.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Instance};
use crate::error::{Error, Result};
use crate::par;
use crate::score::{check_ranking, ScoreRecord};
use crate::textproc::{tokenize, TokenSeq};

/// Zero-match numerator used by [`bleu2`].
pub const BLEU_EPSILON: f64 = 0.1;

/// Description of the BLEU-2 variant, emitted with diagnostic output.
pub const BLEU2_VARIANT: &str = "bleu2: BP * sqrt(p1 * p2); clipped n-gram precision; \
zero matches -> numerator 0.1; candidate without n-grams of an order -> p = 1 if the \
reference has none either, else 0.1; BP = min(1, exp(1 - |ref| / |cand|)); \
candidate = source text, reference = target text";

fn jaccard_sets(a: &HashSet<&str>, b: &HashSet<&str>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Jaccard index of the unique token sets. Two empty texts score 1.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokenize(a), tokenize(b));
    jaccard_sets(
        &ta.unique().into_iter().collect(),
        &tb.unique().into_iter().collect(),
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens(a: &TokenSeq, b: &TokenSeq) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * lcs_len(a.tokens(), b.tokens()) as f64 / (a.len() + b.len()) as f64
}

/// ROUGE-L F-measure with β = 1: `2 * LCS / (|a| + |b|)`.
pub fn rouge_l(a: &str, b: &str) -> f64 {
    rouge_l_tokens(&tokenize(a), &tokenize(b))
}

fn ngram_counts(seq: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in seq.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

fn modified_precision(cand: &[String], reference: &[String], n: usize) -> f64 {
    let total = cand.len().saturating_sub(n - 1);
    if total == 0 {
        return if reference.len() < n {
            1.0
        } else {
            BLEU_EPSILON
        };
    }
    let ref_counts = ngram_counts(reference, n);
    let matches: usize = ngram_counts(cand, n)
        .into_iter()
        .map(|(g, c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    if matches == 0 {
        BLEU_EPSILON / total as f64
    } else {
        matches as f64 / total as f64
    }
}

pub fn bleu2_tokens(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let (c, r) = (candidate.tokens(), reference.tokens());
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) => return 0.0,
        _ => {}
    }
    let p1 = modified_precision(c, r, 1);
    let p2 = modified_precision(c, r, 2);
    let bp = (1.0 - r.len() as f64 / c.len() as f64).exp().min(1.0);
    bp * (p1 * p2).sqrt()
}

/// Smoothed BLEU-2; see [`BLEU2_VARIANT`] for the exact rules.
pub fn bleu2(candidate: &str, reference: &str) -> f64 {
    bleu2_tokens(&tokenize(candidate), &tokenize(reference))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    HypToHyp,
    HypToPrem,
    PremToPrem,
    PremToHyp,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::HypToHyp,
        Channel::HypToPrem,
        Channel::PremToPrem,
        Channel::PremToHyp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::HypToHyp => "hyp_to_hyp",
            Channel::HypToPrem => "hyp_to_prem",
            Channel::PremToPrem => "prem_to_prem",
            Channel::PremToHyp => "prem_to_hyp",
        }
    }

    fn source_is_hypothesis(self) -> bool {
        matches!(self, Channel::HypToHyp | Channel::HypToPrem)
    }

    fn target_is_hypothesis(self) -> bool {
        matches!(self, Channel::HypToHyp | Channel::PremToHyp)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Percentile bucket `[lo, hi)` of the ranking, the last one closed.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn label(&self) -> String {
        fn pct(x: f64) -> String {
            if x.fract() == 0.0 {
                format!("{x:.0}")
            } else {
                format!("{x}")
            }
        }
        format!("{}-{}%", pct(self.lo), pct(self.hi))
    }
}

/// Builds intervals from ascending percentile edges, e.g. `[0, 10, 20, 100]`.
pub fn intervals_from_edges(edges: &[f64]) -> Result<Vec<Interval>> {
    if edges.len() < 2 {
        return Err(Error::param("need at least two interval edges"));
    }
    if edges
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        || edges[0] < 0.0
        || edges[edges.len() - 1] > 100.0
    {
        return Err(Error::param(
            "interval edges must increase strictly within [0, 100]",
        ));
    }
    Ok(edges
        .windows(2)
        .map(|w| Interval { lo: w[0], hi: w[1] })
        .collect())
}

/// Bucket of the 1-based `rank` among `n`, using percentile `(rank - 1) / n`.
pub fn bucket_of(rank: usize, n: usize, intervals: &[Interval]) -> Option<usize> {
    let pct = (rank - 1) as f64 / n as f64 * 100.0;
    let last = intervals.len().checked_sub(1)?;
    intervals
        .iter()
        .enumerate()
        .position(|(i, iv)| pct >= iv.lo && (pct < iv.hi || (i == last && pct <= iv.hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRecord {
    pub interval: String,
    pub channel: Channel,
    pub source_rank: usize,
    pub source_uid: String,
    pub target_uid: String,
    pub jaccard: f64,
    pub bleu2: f64,
    pub rouge_l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalAggregate {
    pub interval: String,
    pub channel: Channel,
    pub count: usize,
    pub mean_jaccard: Option<f64>,
    pub mean_bleu2: Option<f64>,
    pub mean_rouge_l: Option<f64>,
    /// Jaccard between the union of source-field tokens across the interval
    /// and the union of target-field tokens across the whole target corpus.
    pub set_jaccard: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChannelReport {
    pub records: Vec<OverlapRecord>,
    pub aggregates: Vec<IntervalAggregate>,
}

struct Field {
    toks: TokenSeq,
    set: HashSet<String>,
}

impl Field {
    fn new(text: &str) -> Self {
        let toks = tokenize(text);
        let set = toks.tokens().iter().cloned().collect();
        Field { toks, set }
    }

    fn jaccard(&self, other: &Field) -> f64 {
        if self.set.is_empty() && other.set.is_empty() {
            return 1.0;
        }
        let (small, large) = if self.set.len() <= other.set.len() {
            (&self.set, &other.set)
        } else {
            (&other.set, &self.set)
        };
        let inter = small.iter().filter(|t| large.contains(*t)).count();
        inter as f64 / (self.set.len() + other.set.len() - inter) as f64
    }
}

struct Fields {
    premise: Field,
    hypothesis: Field,
}

impl Fields {
    fn new(inst: &Instance) -> Self {
        Fields {
            premise: Field::new(&inst.premise),
            hypothesis: Field::new(&inst.hypothesis),
        }
    }

    fn get(&self, hypothesis: bool) -> &Field {
        if hypothesis {
            &self.hypothesis
        } else {
            &self.premise
        }
    }
}

/// For each ranked source instance inside one of the intervals, finds the
/// target instance with the highest Jaccard per channel (first in target order
/// on ties) and reports all three metrics for that pair, plus per-interval
/// aggregates. Records come out in rank order, channels in [`Channel::ALL`]
/// order.
pub fn channel_report(
    source: &Corpus,
    target: &Corpus,
    records: &[ScoreRecord],
    intervals: &[Interval],
) -> Result<ChannelReport> {
    if target.is_empty() {
        return Err(Error::param(
            "overlap diagnostics need a non-empty target corpus",
        ));
    }
    check_ranking(records)?;
    let index = source.uid_index();
    if records.len() != source.len() {
        return Err(Error::param(
            "score records must rank the whole source corpus",
        ));
    }
    let mut ranked_sources: Vec<(usize, &Instance)> = Vec::with_capacity(records.len());
    for r in records {
        let &i = index
            .get(r.uid.as_str())
            .ok_or_else(|| Error::UnknownUid(r.uid.clone()))?;
        ranked_sources.push((r.rank, &source.instances[i]));
    }
    ranked_sources.sort_by_key(|&(rank, _)| rank);
    let n = ranked_sources.len();

    let target_fields: Vec<Fields> = par::map(&target.instances, Fields::new);

    let per_source: Vec<Option<(usize, Fields, Vec<OverlapRecord>)>> =
        par::map(&ranked_sources, |&(rank, inst)| {
            let bucket = bucket_of(rank, n, intervals)?;
            let fields = Fields::new(inst);
            let label = intervals[bucket].label();
            let rows = Channel::ALL
                .iter()
                .map(|&ch| {
                    let s = fields.get(ch.source_is_hypothesis());
                    let mut best = (0usize, f64::NEG_INFINITY);
                    for (j, t) in target_fields.iter().enumerate() {
                        let jac = s.jaccard(t.get(ch.target_is_hypothesis()));
                        if jac > best.1 {
                            best = (j, jac);
                        }
                    }
                    let t = target_fields[best.0].get(ch.target_is_hypothesis());
                    OverlapRecord {
                        interval: label.clone(),
                        channel: ch,
                        source_rank: rank,
                        source_uid: inst.uid.clone(),
                        target_uid: target.instances[best.0].uid.clone(),
                        jaccard: best.1,
                        bleu2: bleu2_tokens(&s.toks, &t.toks),
                        rouge_l: rouge_l_tokens(&s.toks, &t.toks),
                    }
                })
                .collect();
            Some((bucket, fields, rows))
        });

    let target_vocab = |hyp: bool| -> HashSet<&str> {
        target_fields
            .iter()
            .flat_map(|f| f.get(hyp).set.iter().map(String::as_str))
            .collect()
    };
    let target_prem = target_vocab(false);
    let target_hyp = target_vocab(true);

    let mut report = ChannelReport::default();
    let mut sums = vec![[(0usize, 0.0, 0.0, 0.0); 4]; intervals.len()];
    let mut unions: Vec<[HashSet<&str>; 2]> = vec![Default::default(); intervals.len()];
    for (bucket, fields, rows) in per_source.iter().flatten() {
        for (c, row) in rows.iter().enumerate() {
            let s = &mut sums[*bucket][c];
            s.0 += 1;
            s.1 += row.jaccard;
            s.2 += row.bleu2;
            s.3 += row.rouge_l;
        }
        unions[*bucket][0].extend(fields.premise.set.iter().map(String::as_str));
        unions[*bucket][1].extend(fields.hypothesis.set.iter().map(String::as_str));
        report.records.extend(rows.iter().cloned());
    }

    for (b, iv) in intervals.iter().enumerate() {
        for (c, &ch) in Channel::ALL.iter().enumerate() {
            let (count, sj, sb, sr) = sums[b][c];
            let mean = |s: f64| (count > 0).then(|| s / count as f64);
            let src_union = &unions[b][ch.source_is_hypothesis() as usize];
            let tgt_union = if ch.target_is_hypothesis() {
                &target_hyp
            } else {
                &target_prem
            };
            report.aggregates.push(IntervalAggregate {
                interval: iv.label(),
                channel: ch,
                count,
                mean_jaccard: mean(sj),
                mean_bleu2: mean(sb),
                mean_rouge_l: mean(sr),
                set_jaccard: (count > 0).then(|| jaccard_sets(src_union, tgt_union)),
            });
        }
    }
    Ok(report)
}

/// Columns: interval, channel, source_rank, source_uid, target_uid, jaccard,
/// bleu2, rouge_l.
pub fn write_records_csv<W: Write>(records: &[OverlapRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "interval",
        "channel",
        "source_rank",
        "source_uid",
        "target_uid",
        "jaccard",
        "bleu2",
        "rouge_l",
    ])
    .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.interval.clone(),
            r.channel.to_string(),
            r.source_rank.to_string(),
            r.source_uid.clone(),
            r.target_uid.clone(),
            format!("{:.4}", r.jaccard),
            format!("{:.4}", r.bleu2),
            format!("{:.4}", r.rouge_l),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregates_csv<W: Write>(rows: &[IntervalAggregate], writer: W) -> Result<()> {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "interval",
        "channel",
        "count",
        "mean_jaccard",
        "mean_bleu2",
        "mean_rouge_l",
        "set_jaccard",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.interval.clone(),
            r.channel.to_string(),
            r.count.to_string(),
            opt(r.mean_jaccard),
            opt(r.mean_bleu2),
            opt(r.mean_rouge_l),
            opt(r.set_jaccard),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::param(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::score::{ranked, Method, Orientation};
    use proptest::prelude::*;

    const ROW1_SRC: &str = "Inactive session are shut down after a defined period of inactivity.";
    const ROW1_TGT: &str = "Automatic logoff. Implement electronic procedures that terminate an electronic session after a predetermined time of inactivity.";
    const ROW2_SRC: &str = "An Incident may include but not be limited to:";
    const ROW2_TGT: &str = "Patient information may include (but is not limited to) historical patient documentation and test results.";

    #[test]
    fn quoted_pairs() {
        assert!((jaccard(ROW1_SRC, ROW1_TGT) - 5.0 / 21.0).abs() < 1e-12);
        assert!((jaccard(ROW2_SRC, ROW2_TGT) - 6.0 / 17.0).abs() < 1e-12);
        assert!((rouge_l(ROW1_SRC, ROW1_TGT) - 10.0 / 27.0).abs() < 1e-12);
        assert!((rouge_l(ROW2_SRC, ROW2_TGT) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(jaccard("", "..."), 1.0);
        assert_eq!(jaccard("a", ""), 0.0);
        assert_eq!(rouge_l("", ""), 1.0);
        assert_eq!(rouge_l("a b", ""), 0.0);
        assert_eq!(bleu2("", ""), 1.0);
        assert_eq!(bleu2("", "a"), 0.0);
        assert_eq!(bleu2("word", "word"), 1.0);
    }

    #[test]
    fn bleu2_hand_evaluation() {
        // cand [a b c d], ref [b a d c]: unigram matches 4/4, bigrams
        // (a b),(b c),(c d) vs (b a),(a d),(d c) share none -> 0.1/3; BP = 1.
        let v = bleu2("a b c d", "b a d c");
        assert!((v - (1.0f64 * (0.1 / 3.0)).sqrt()).abs() < 1e-12);
        // Shorter candidate: cand [a b], ref [a b c d] -> p1 = p2 = 1,
        // BP = exp(1 - 4/2).
        assert!((bleu2("a b", "a b c d") - (-1.0f64).exp()).abs() < 1e-12);
        // Clipping: cand [the the the], ref [the cat] -> p1 = 1/3.
        let v = bleu2("the the the", "the cat");
        assert!((v - (1.0f64 / 3.0 * (0.1 / 2.0)).sqrt()).abs() < 1e-12);
    }

    fn inst(uid: &str, p: &str, h: &str) -> Instance {
        Instance::new(uid, p, h, Label::Entailment)
    }

    #[test]
    fn bucketing() {
        let iv = intervals_from_edges(&[0.0, 10.0, 20.0]).unwrap();
        assert_eq!(bucket_of(5, 100, &iv), Some(0));
        assert_eq!(bucket_of(11, 100, &iv), Some(1));
        assert_eq!(bucket_of(21, 100, &iv), Some(1));
        assert_eq!(bucket_of(22, 100, &iv), None);
        assert_eq!(iv[0].label(), "0-10%");
        assert!(intervals_from_edges(&[0.0]).is_err());
        assert!(intervals_from_edges(&[0.0, 50.0, 40.0]).is_err());
        let whole = intervals_from_edges(&[0.0, 100.0]).unwrap();
        assert_eq!(bucket_of(1, 1, &whole), Some(0));
    }

    #[test]
    fn single_instance_report() {
        let src = Corpus::new("s", vec![inst("s1", ROW2_SRC, ROW1_SRC)]);
        let tgt = Corpus::new("t", vec![inst("t1", ROW2_TGT, ROW1_TGT)]);
        let recs = ranked(
            [("s1".to_string(), 0.0)],
            Method::External,
            Orientation::Asc,
        );
        let rep = channel_report(
            &src,
            &tgt,
            &recs,
            &intervals_from_edges(&[0.0, 100.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(rep.records.len(), 4);
        assert!(rep.records.iter().all(|r| r.interval == "0-100%"));
        let h2h = &rep.records[0];
        assert_eq!(h2h.channel, Channel::HypToHyp);
        assert!((h2h.jaccard - 5.0 / 21.0).abs() < 1e-12);
        let p2p = &rep.records[2];
        assert!((p2p.rouge_l - 0.5).abs() < 1e-12);
        assert_eq!(rep.aggregates.len(), 4);
    }

    #[test]
    fn verbatim_copies_fill_first_interval() {
        let targets: Vec<Instance> = (0..10)
            .map(|i| {
                inst(
                    &format!("t{i}"),
                    &format!("requirement {i} audit log"),
                    &format!("we keep audit log {i}"),
                )
            })
            .collect();
        let mut sources: Vec<Instance> = targets
            .iter()
            .map(|t| inst(&format!("copy-{}", t.uid), &t.premise, &t.hypothesis))
            .collect();
        for i in 0..90 {
            sources.push(inst(
                &format!("far{i:02}"),
                &format!("unrelated clause {i} about payment"),
                &format!("invoice terms {i} apply"),
            ));
        }
        let src = Corpus::new("s", sources);
        let tgt = Corpus::new("t", targets);
        let recs = ranked(
            src.iter()
                .enumerate()
                .map(|(i, x)| (x.uid.clone(), i as f64)),
            Method::External,
            Orientation::Asc,
        );
        let iv = intervals_from_edges(&[0.0, 10.0, 20.0, 100.0]).unwrap();
        let rep = channel_report(&src, &tgt, &recs, &iv).unwrap();
        let agg = |label: &str, ch: Channel| {
            rep.aggregates
                .iter()
                .find(|a| a.interval == label && a.channel == ch)
                .unwrap()
                .clone()
        };
        assert_eq!(agg("0-10%", Channel::HypToHyp).mean_jaccard, Some(1.0));
        assert_eq!(agg("0-10%", Channel::PremToPrem).mean_jaccard, Some(1.0));
        assert_eq!(agg("0-10%", Channel::HypToHyp).count, 10);
        assert!(agg("10-20%", Channel::HypToHyp).mean_jaccard.unwrap() < 1.0);
        assert!(agg("20-100%", Channel::PremToPrem).mean_jaccard.unwrap() < 1.0);
    }

    #[test]
    fn empty_bucket_has_null_means() {
        let src = Corpus::new("s", vec![inst("a", "x y", "z"), inst("b", "q", "r")]);
        let tgt = Corpus::new("t", vec![inst("t", "x", "z")]);
        let recs = ranked(
            [("a".into(), 0.0), ("b".into(), 1.0)],
            Method::External,
            Orientation::Asc,
        );
        let iv = intervals_from_edges(&[0.0, 10.0, 20.0, 50.0, 100.0]).unwrap();
        let rep = channel_report(&src, &tgt, &recs, &iv).unwrap();
        let empty = rep
            .aggregates
            .iter()
            .find(|a| a.interval == "10-20%")
            .unwrap();
        assert_eq!(
            (empty.count, empty.mean_jaccard, empty.set_jaccard),
            (0, None, None)
        );
        let mut csv = Vec::new();
        write_aggregates_csv(&rep.aggregates, &mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .contains("10-20%,hyp_to_hyp,0,,,,\n"));
    }

    proptest! {
        #[test]
        fn symmetric_metrics(a in "[a-e ,.]{0,40}", b in "[a-e ,.]{0,40}") {
            prop_assert!((jaccard(&a, &b) - jaccard(&b, &a)).abs() < 1e-12);
            prop_assert!((rouge_l(&a, &b) - rouge_l(&b, &a)).abs() < 1e-12);
            for v in [jaccard(&a, &b), rouge_l(&a, &b), bleu2(&a, &b)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn bleu_self_is_one(a in "[a-z]{1,5}( [a-z]{1,5}){0,12}") {
            prop_assert!((bleu2(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn case_and_punctuation_invariant(words in prop::collection::vec("[a-z]{1,6}", 1..10), other in "[a-z ]{1,30}") {
            let plain = words.join(" ");
            let noisy: String = words.iter().map(|w| format!("({}),", w.to_uppercase())).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(jaccard(&plain, &other), jaccard(&noisy, &other));
            prop_assert_eq!(rouge_l(&plain, &other), rouge_l(&noisy, &other));
            prop_assert_eq!(bleu2(&plain, &other), bleu2(&noisy, &other));
        }

        #[test]
        fn shared_token_never_shrinks_intersection(a in "[a-f ]{0,30}", b in "[a-f]{1,4}( [a-f]{1,4}){0,8}", pick in any::<prop::sample::Index>()) {
            let tb = tokenize(&b);
            let extra = pick.get(tb.tokens()).clone();
            let ta = tokenize(&a);
            let ua: HashSet<&str> = ta.unique().into_iter().collect();
            let ub: HashSet<&str> = tb.unique().into_iter().collect();
            let before = ua.intersection(&ub).count();
            let grown = format!("{a} {extra}");
            let tg = tokenize(&grown);
            let ug: HashSet<&str> = tg.unique().into_iter().collect();
            prop_assert!(ug.intersection(&ub).count() >= before);
        }
    }
}
