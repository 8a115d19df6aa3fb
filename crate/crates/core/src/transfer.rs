//! Transfer evaluation: a proxy NLI classifier trained on target data plus a
//! source selection, its metrics, and the ratio sweep.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Instance, Label, Split};
use crate::error::{Error, Result};
use crate::overlap::csv_err;
use crate::par;
use crate::pipeline::{score_source, ScoreInputs, ScorerConfig};
use crate::score::Method;
use crate::selection::{select_random, select_top, selection_size, RATIO_GRID};
use crate::sgd::{train_logistic, Example, LogisticModel, SgdConfig};
use crate::textproc::{
    derive_seed, hash_features, ngram_hash, tokenize, FeatureConfig, FeatureVec,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyConfig {
    /// Hashing settings of each of the three feature blocks.
    pub features: FeatureConfig,
    pub training: SgdConfig,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            features: FeatureConfig::new([1, 2], 1 << 18).expect("valid default"),
            training: SgdConfig {
                epochs: 20,
                learning_rate: 2.0,
                ..SgdConfig::default()
            },
        }
    }
}

/// Premise n-grams, hypothesis n-grams, and the unigrams the two share, in
/// three consecutive blocks of `config.dim()` indices; L2-normalized overall.
pub fn pair_features(inst: &Instance, config: &FeatureConfig) -> FeatureVec {
    let p = tokenize(&inst.premise);
    let h = tokenize(&inst.hypothesis);
    let hyp_vocab = h.unique();
    let shared = FeatureVec::from_entries(
        config.dim(),
        p.unique()
            .intersection(&hyp_vocab)
            .map(|t| (config.index(ngram_hash(&[t])), 1.0)),
    )
    .normalized();
    FeatureVec::concat(&[hash_features(&p, config), hash_features(&h, config), shared]).normalized()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxyModel {
    model: LogisticModel,
    features: FeatureConfig,
    training: SgdConfig,
    weighted: bool,
}

impl ProxyModel {
    pub fn model(&self) -> &LogisticModel {
        &self.model
    }

    pub fn features(&self) -> &FeatureConfig {
        &self.features
    }

    pub fn training(&self) -> &SgdConfig {
        &self.training
    }

    /// Whether per-example weights were supplied at training time.
    pub fn weighted(&self) -> bool {
        self.weighted
    }

    /// Posterior of entailment.
    pub fn predict_proba(&self, inst: &Instance) -> f64 {
        self.model
            .predict_proba(&pair_features(inst, &self.features))
    }

    pub fn predict(&self, inst: &Instance) -> Label {
        label_of(self.predict_proba(inst))
    }
}

fn label_of(p: f64) -> Label {
    if p >= 0.5 {
        Label::Entailment
    } else {
        Label::NotEntailment
    }
}

fn target_of(label: Label) -> f64 {
    match label {
        Label::Entailment => 1.0,
        Label::NotEntailment => 0.0,
    }
}

fn fit(
    examples: &[(&FeatureVec, Label, f64)],
    config: &ProxyConfig,
    weighted: bool,
) -> Result<ProxyModel> {
    let active = examples.iter().filter(|e| e.2 != 0.0);
    let labels: BTreeSet<Label> = active.map(|e| e.1).collect();
    if labels.len() < 2 {
        return Err(Error::param("proxy training data must contain both labels"));
    }
    let ex: Vec<Example> = examples
        .iter()
        .map(|&(f, label, weight)| Example {
            features: f,
            target: target_of(label),
            weight,
        })
        .collect();
    let dim = 3 * config.features.dim();
    Ok(ProxyModel {
        model: train_logistic(&ex, dim, &config.training)?,
        features: config.features.clone(),
        training: config.training.clone(),
        weighted,
    })
}

/// Trains the proxy on `train`. Instances missing from `weights` get weight 1.
pub fn train_proxy(
    train: &Corpus,
    weights: Option<&HashMap<String, f64>>,
    config: &ProxyConfig,
) -> Result<ProxyModel> {
    if train.is_empty() {
        return Err(Error::param("proxy training corpus is empty"));
    }
    let feats = par::map(&train.instances, |i| pair_features(i, &config.features));
    let examples: Vec<(&FeatureVec, Label, f64)> = train
        .iter()
        .zip(&feats)
        .map(|(inst, f)| {
            let w = weights
                .and_then(|m| m.get(&inst.uid))
                .copied()
                .unwrap_or(1.0);
            (f, inst.label, w)
        })
        .collect();
    fit(&examples, config, weights.is_some())
}

/// Confusion counts with entailment as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_labels(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Confusion::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (Label::Entailment, Label::Entailment) => c.tp += 1,
                (Label::Entailment, Label::NotEntailment) => c.fp += 1,
                (Label::NotEntailment, Label::Entailment) => c.fn_ += 1,
                (Label::NotEntailment, Label::NotEntailment) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        Self::ratio(2 * tp, 2 * tp + fp + fn_)
    }

    /// Positive-class precision.
    pub fn precision(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    /// Positive-class recall.
    pub fn recall(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    /// F1 over counts pooled across both classes. Each instance contributes
    /// one true or false positive for some class, so this is the accuracy.
    pub fn micro_f1(&self) -> f64 {
        let tp = self.tp + self.tn;
        let fp = self.fp + self.fn_;
        Self::f1(tp, fp, fp)
    }

    /// Unweighted mean of the per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        (Self::f1(self.tp, self.fp, self.fn_) + Self::f1(self.tn, self.fn_, self.fp)) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
    pub n_train_target: usize,
    pub n_train_source_selected: usize,
    pub method: String,
    pub ratio: f64,
    pub seed: u64,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        EvalReport {
            precision: confusion.precision(),
            recall: confusion.recall(),
            micro_f1: confusion.micro_f1(),
            macro_f1: confusion.macro_f1(),
            confusion,
            n_train_target: 0,
            n_train_source_selected: 0,
            method: String::new(),
            ratio: 0.0,
            seed: 0,
        }
    }
}

fn evaluate_features(model: &LogisticModel, test: &[(FeatureVec, Label)]) -> EvalReport {
    EvalReport::from_confusion(Confusion::from_labels(
        test.iter()
            .map(|(f, actual)| (label_of(model.predict_proba(f)), *actual)),
    ))
}

/// Thresholds the entailment posterior at 0.5 over `test`.
pub fn evaluate(model: &ProxyModel, test: &Corpus) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::param("test corpus is empty"));
    }
    let preds = par::map(&test.instances, |i| (model.predict(i), i.label));
    let mut report = EvalReport::from_confusion(Confusion::from_labels(preds));
    report.seed = model.training.seed;
    Ok(report)
}

/// One-sided exact sign test: probability of at least `wins` successes out of
/// `wins + losses` fair coin flips. Ties are dropped by the caller.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    let mut p = 0.0;
    let mut coef = 1.0f64;
    for k in 0..=n {
        if k >= wins {
            p += coef;
        }
        coef = coef * (n - k) as f64 / (k + 1) as f64;
    }
    p / 2f64.powi(n as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub scorer: ScorerConfig,
    pub proxy: ProxyConfig,
    /// Train on importance-selected instances with their importance weights
    /// instead of weight 1.
    pub reweight_importance: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            methods: vec![
                Method::MooreLewis,
                Method::Importance,
                Method::Embedding,
                Method::Random,
            ],
            ratios: RATIO_GRID.to_vec(),
            seeds: vec![0],
            scorer: ScorerConfig::default(),
            proxy: ProxyConfig::default(),
            reweight_importance: false,
        }
    }
}

pub const TARGET_ONLY: &str = "target_only";
pub const FULL: &str = "full";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// A method name, [`TARGET_ONLY`] or [`FULL`].
    pub method: String,
    pub ratio: f64,
    pub seed: u64,
    pub split: Split,
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub n_selected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub ratio: f64,
    pub split: Split,
    pub n_seeds: usize,
    pub mean_micro_f1: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std_micro_f1: f64,
    pub mean_macro_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn mean_micro_f1(&self, method: &str, ratio: f64, split: Split) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.ratio == ratio && s.split == split)
            .map(|s| s.mean_micro_f1)
    }

    /// Per-seed micro-F1 of one cell, in seed order.
    pub fn per_seed(&self, method: &str, ratio: f64, split: Split) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.ratio == ratio && r.split == split)
            .map(|r| (r.seed, r.micro_f1))
            .collect()
    }
}

struct Cell {
    method: String,
    ratio: f64,
    seed: u64,
    selected: Vec<(usize, f64)>,
}

/// Runs the ratio sweep. Source instances are scored against target train and
/// validation together (the validation numbers therefore overlap with
/// selection, while test stays held out);
/// for every seed the grid adds one row per (method, ratio) and split plus
/// the target-only and full-augmentation baselines. Rows come out ordered by
/// seed, then cell, then split (validation before test).
pub fn run_sweep(
    target: &Corpus,
    source: &Corpus,
    config: &SweepConfig,
    inputs: ScoreInputs<'_>,
) -> Result<SweepResult> {
    for &m in &config.methods {
        if matches!(m, Method::Full) {
            return Err(Error::param(
                "full augmentation is a baseline, not a sweep method",
            ));
        }
    }
    if config.methods.is_empty() || config.ratios.is_empty() || config.seeds.is_empty() {
        return Err(Error::param(
            "sweep needs at least one method, ratio and seed",
        ));
    }
    if let Some(r) = config.ratios.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::param(format!("ratio must lie in (0, 1], got {r}")));
    }
    if source.is_empty() {
        return Err(Error::param("source corpus is empty"));
    }
    let train = target.split(Split::Train);
    let selection_target = Corpus::new(
        format!("{}:train+validation", target.name),
        target
            .iter()
            .filter(|i| matches!(i.split, Split::Train | Split::Validation))
            .cloned()
            .collect(),
    );
    let eval_splits = [Split::Validation, Split::Test];
    for s in [Split::Train, Split::Validation, Split::Test] {
        if target.split(s).is_empty() {
            return Err(Error::param(format!("target corpus has no {s} split")));
        }
    }

    let fcfg = &config.proxy.features;
    let train_feats = par::map(&train.instances, |i| pair_features(i, fcfg));
    let source_feats = par::map(&source.instances, |i| pair_features(i, fcfg));
    let eval_sets: Vec<Vec<(FeatureVec, Label)>> = eval_splits
        .iter()
        .map(|&s| {
            let c = target.split(s);
            par::map(&c.instances, |i| (pair_features(i, fcfg), i.label))
        })
        .collect();
    let index = source.uid_index();

    // Only the importance classifier draws from the seed; other scorers are
    // computed once and shared by every seed.
    let score_key = |m: Method, seed: u64| (m, (m == Method::Importance).then_some(seed));
    let mut jobs: Vec<(Method, Option<u64>)> = Vec::new();
    for &s in &config.seeds {
        for &m in &config.methods {
            let key = score_key(m, s);
            if m != Method::Random && !jobs.contains(&key) {
                jobs.push(key);
            }
        }
    }
    let scored = par::map(&jobs, |&(m, s)| {
        let seed = derive_seed(s.unwrap_or(0), "sweep/score");
        score_source(m, source, &selection_target, &config.scorer, inputs, seed)
    });
    let mut scores = HashMap::new();
    for (job, out) in jobs.into_iter().zip(scored) {
        scores.insert(job, out?);
    }

    let mut cells = Vec::new();
    for &seed in &config.seeds {
        cells.push(Cell {
            method: TARGET_ONLY.into(),
            ratio: 0.0,
            seed,
            selected: Vec::new(),
        });
        cells.push(Cell {
            method: FULL.into(),
            ratio: 1.0,
            seed,
            selected: (0..source.len()).map(|i| (i, 1.0)).collect(),
        });
        for &m in &config.methods {
            for &ratio in &config.ratios {
                let manifest = match m {
                    Method::Random => {
                        select_random(source, ratio, derive_seed(seed, "sweep/random"))?
                    }
                    _ => select_top(&scores[&score_key(m, seed)].records, ratio)?,
                };
                debug_assert_eq!(manifest.len(), selection_size(source.len(), ratio));
                let weights: Option<HashMap<&str, f64>> =
                    match (&scores.get(&score_key(m, seed)), config.reweight_importance) {
                        (Some(out), true) => out
                            .weights
                            .as_ref()
                            .map(|ws| ws.iter().map(|w| (w.uid.as_str(), w.weight)).collect()),
                        _ => None,
                    };
                let selected = manifest
                    .selected
                    .iter()
                    .map(|uid| {
                        let w = weights.as_ref().map_or(1.0, |ws| ws[uid.as_str()]);
                        (index[uid.as_str()], w)
                    })
                    .collect();
                cells.push(Cell {
                    method: m.as_str().into(),
                    ratio,
                    seed,
                    selected,
                });
            }
        }
    }

    let outcomes = par::map(&cells, |cell| -> Result<Vec<SweepRow>> {
        let mut examples: Vec<(&FeatureVec, Label, f64)> = train
            .iter()
            .zip(&train_feats)
            .map(|(inst, f)| (f, inst.label, 1.0))
            .collect();
        examples.extend(
            cell.selected
                .iter()
                .map(|&(i, w)| (&source_feats[i], source.instances[i].label, w)),
        );
        let proxy_cfg = ProxyConfig {
            features: config.proxy.features.clone(),
            training: SgdConfig {
                seed: derive_seed(cell.seed, "sweep/proxy"),
                ..config.proxy.training.clone()
            },
        };
        let model = fit(&examples, &proxy_cfg, config.reweight_importance)?;
        Ok(eval_splits
            .iter()
            .zip(&eval_sets)
            .map(|(&split, set)| {
                let rep = evaluate_features(&model.model, set);
                SweepRow {
                    method: cell.method.clone(),
                    ratio: cell.ratio,
                    seed: cell.seed,
                    split,
                    precision: rep.precision,
                    recall: rep.recall,
                    micro_f1: rep.micro_f1,
                    macro_f1: rep.macro_f1,
                    n_selected: cell.selected.len(),
                }
            })
            .collect())
    });
    let mut rows = Vec::new();
    for out in outcomes {
        rows.extend(out?);
    }
    let summary = summarize(&rows);
    Ok(SweepResult { rows, summary })
}

type Group<'a> = ((String, f64, Split), Vec<&'a SweepRow>);

fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<Group> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.ratio, r.split);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((method, ratio, split), v)| {
            let n = v.len() as f64;
            let mean = v.iter().map(|r| r.micro_f1).sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|r| (r.micro_f1 - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SummaryRow {
                method,
                ratio,
                split,
                n_seeds: v.len(),
                mean_micro_f1: mean,
                std_micro_f1: var.sqrt(),
                mean_macro_f1: v.iter().map(|r| r.macro_f1).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Columns: method, ratio, seed, split, precision, recall, micro_f1,
/// macro_f1, n_selected.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method",
        "ratio",
        "seed",
        "split",
        "precision",
        "recall",
        "micro_f1",
        "macro_f1",
        "n_selected",
    ])
    .map_err(csv_err)?;
    for r in &result.rows {
        w.write_record([
            r.method.clone(),
            r.ratio.to_string(),
            r.seed.to_string(),
            r.split.to_string(),
            format!("{:.6}", r.precision),
            format!("{:.6}", r.recall),
            format!("{:.6}", r.micro_f1),
            format!("{:.6}", r.macro_f1),
            r.n_selected.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(result: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method",
        "ratio",
        "split",
        "n_seeds",
        "mean_micro_f1",
        "std_micro_f1",
        "mean_macro_f1",
    ])
    .map_err(csv_err)?;
    for r in &result.summary {
        w.write_record([
            r.method.clone(),
            r.ratio.to_string(),
            r.split.to_string(),
            r.n_seeds.to_string(),
            format!("{:.6}", r.mean_micro_f1),
            format!("{:.6}", r.std_micro_f1),
            format!("{:.6}", r.mean_macro_f1),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Line chart of mean micro-F1 against ratio for one split: one polyline per
/// method, the full-augmentation baseline dashed and target-only dotted.
/// Ratios are spaced evenly along the x axis.
pub fn render_svg(result: &SweepResult, split: Split) -> String {
    let rows: Vec<&SummaryRow> = result.summary.iter().filter(|r| r.split == split).collect();
    let mut ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.method != TARGET_ONLY && r.method != FULL)
        .map(|r| r.ratio)
        .collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let mut methods: Vec<&str> = Vec::new();
    for r in &rows {
        if r.method != TARGET_ONLY && r.method != FULL && !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }

    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 150.0, 30.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let lo = rows.iter().map(|r| r.mean_micro_f1).fold(1.0, f64::min);
    let hi = rows.iter().map(|r| r.mean_micro_f1).fold(0.0, f64::max);
    let y_lo = (lo * 10.0).floor() / 10.0;
    let y_hi = ((hi * 10.0).ceil() / 10.0).max(y_lo + 0.1);
    let x_at = |i: usize| {
        if ratios.len() <= 1 {
            left + pw / 2.0
        } else {
            left + pw * i as f64 / (ratios.len() - 1) as f64
        }
    };
    let y_at = |v: f64| top + ph * (1.0 - (v - y_lo) / (y_hi - y_lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle">{split} micro-F1</text>"#,
        left + pw / 2.0
    );
    let _ = writeln!(
        s,
        r##"<path d="M{left:.1},{top:.1} V{:.1} H{:.1}" fill="none" stroke="#333"/>"##,
        top + ph,
        left + pw
    );
    for t in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * t as f64 / 4.0;
        let y = y_at(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0
        );
    }
    for (i, r) in ratios.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}%</text>"#,
            x_at(i),
            top + ph + 18.0,
            (r * 100.0 * 1e6).round() / 1e6
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">selection ratio</text>"#,
        left + pw / 2.0,
        h - 8.0
    );

    let mut legend: Vec<(String, &str, &str)> = Vec::new();
    for (m, method) in methods.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let points: Vec<String> = ratios
            .iter()
            .enumerate()
            .filter_map(|(i, &ratio)| {
                rows.iter()
                    .find(|r| r.method == *method && r.ratio == ratio)
                    .map(|r| format!("{:.1},{:.1}", x_at(i), y_at(r.mean_micro_f1)))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        legend.push((method.to_string(), color, ""));
    }
    for (name, dash) in [(FULL, "6,4"), (TARGET_ONLY, "2,3")] {
        if let Some(r) = rows.iter().find(|r| r.method == name) {
            let y = y_at(r.mean_micro_f1);
            let _ = writeln!(
                s,
                r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#555" stroke-width="2" stroke-dasharray="{dash}"/>"##,
                left + pw
            );
            legend.push((name.to_string(), "#555", dash));
        }
    }
    for (i, (name, color, dash)) in legend.iter().enumerate() {
        let y = top + 10.0 + 18.0 * i as f64;
        let x = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}"/><text x="{:.1}" y="{:.1}">{name}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
