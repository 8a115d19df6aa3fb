//! The `xds` command-line front end.
//!
//! Settings come from built-in defaults, an optional JSON config file
//! (`--config`), the `XDS_SEED` environment variable (seed only) and flags, in
//! increasing order of precedence. Each artifact is accompanied by
//! `<artifact>.config.json` holding the effective configuration and its
//! fingerprint; JSON artifacts embed the fingerprint directly.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{
    build_pairs, corpus_stats, load_corpus, render_prompt, save_corpus, Corpus, Domain, Label,
    PromptMode, Split,
};
use crate::embedding::{load_embeddings, score_histogram, write_histogram_csv, Aggregator};
use crate::error::Error;
use crate::importance::{threshold_filter, ImportanceWeight};
use crate::moore_lewis::read_external_scores;
use crate::overlap::{
    channel_report, intervals_from_edges, write_aggregates_csv, write_records_csv, BLEU2_VARIANT,
};
use crate::par;
use crate::pipeline::{score_source, ScoreInputs, ScorerConfig};
use crate::score::{load_records, save_records, Method, Orientation};
use crate::selection::{
    materialize, select_full, select_random, select_top, SelectionManifest, RATIO_GRID,
};
use crate::synth::{shift_benchmark, vocab_benchmark, ShiftParams};
use crate::textproc::{derive_seed, fnv1a64, FeatureConfig};
use crate::transfer::{
    evaluate, render_svg, run_sweep, train_proxy, write_summary_csv, write_sweep_csv, ProxyConfig,
    SweepConfig,
};

/// Identifier of the only supported tokenizer.
pub const TOKENIZER: &str = "lowercase-whitespace-edge-trim";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub external_scores: Option<PathBuf>,
}

/// Every setting that can influence an artifact. Output paths and the job
/// count are deliberately absent: they never change artifact contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub tokenizer: String,
    pub method: String,
    pub methods: Vec<String>,
    pub ratio: f64,
    pub ratios: Vec<f64>,
    /// Sweep seeds; empty means just `seed`.
    pub seeds: Vec<u64>,
    pub negative_rate: f64,
    pub intervals: Vec<f64>,
    pub histogram_bins: usize,
    pub regulation: String,
    pub prompt_mode: PromptMode,
    pub scorer: ScorerConfig,
    pub proxy: ProxyConfig,
    pub reweight_importance: bool,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            tokenizer: TOKENIZER.into(),
            method: Method::MooreLewis.as_str().into(),
            methods: Method::SCORERS
                .iter()
                .map(|m| m.as_str().to_string())
                .collect(),
            ratio: 0.05,
            ratios: RATIO_GRID.to_vec(),
            seeds: Vec::new(),
            negative_rate: 0.1,
            intervals: vec![0.0, 10.0, 20.0, 50.0, 100.0],
            histogram_bins: 20,
            regulation: "GDPR".into(),
            prompt_mode: PromptMode::ZeroShot,
            scorer: ScorerConfig::default(),
            proxy: ProxyConfig::default(),
            reweight_importance: false,
            paths: Paths::default(),
        }
    }
}

/// Hash of the canonical JSON serialization.
pub fn fingerprint(config: &RunConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    format!("{:016x}", fnv1a64(canonical.as_bytes()))
}

#[derive(Parser, Debug)]
#[command(
    name = "xds",
    version,
    about = "Cross-domain data selection for NLI corpora"
)]
struct Cli {
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// JSON file with run settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Settings {
    /// Run seed (falls back to XDS_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Selection method: moore-lewis, importance, embedding, random, external or full.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Methods compared by `sweep`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Fraction of the source to keep.
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Ratios swept by `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Seeds swept by `sweep` (default: the run seed).
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Probability of keeping each candidate negative pair.
    #[arg(long, global = true)]
    negative_rate: Option<f64>,
    /// Percentile edges of the diagnostic intervals, e.g. 0,10,20,100.
    #[arg(long, global = true, value_delimiter = ',')]
    intervals: Option<Vec<f64>>,
    /// Bins of the score histogram.
    #[arg(long, global = true)]
    histogram_bins: Option<usize>,
    /// Regulation named in prompts.
    #[arg(long, global = true)]
    regulation: Option<String>,
    /// zero-shot or one-shot.
    #[arg(long, global = true)]
    prompt_mode: Option<String>,
    /// N-gram order of the Moore-Lewis language models.
    #[arg(long, global = true)]
    lm_order: Option<usize>,
    /// Additive smoothing constant.
    #[arg(long, global = true)]
    lm_k: Option<f64>,
    /// Hashed n-gram orders of the domain classifier.
    #[arg(long, global = true, value_delimiter = ',')]
    feature_orders: Option<Vec<usize>>,
    /// Hashed feature dimension of the domain classifier.
    #[arg(long, global = true)]
    feature_dim: Option<usize>,
    /// Bucket count of TF-IDF fallback vectors.
    #[arg(long, global = true)]
    embedding_dim: Option<usize>,
    /// max or mean-top-k.
    #[arg(long, global = true)]
    aggregator: Option<String>,
    /// k for the mean-top-k aggregator.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Correct importance posteriors for class imbalance.
    #[arg(long, global = true, action = ArgAction::Set)]
    prior_correction: Option<bool>,
    /// Train the domain classifier on embeddings instead of n-grams.
    #[arg(long, global = true, action = ArgAction::Set)]
    importance_on_embeddings: Option<bool>,
    /// asc or desc.
    #[arg(long, global = true)]
    external_orientation: Option<String>,
    #[arg(long, global = true)]
    classifier_epochs: Option<usize>,
    #[arg(long, global = true)]
    classifier_learning_rate: Option<f64>,
    #[arg(long, global = true)]
    classifier_l2: Option<f64>,
    #[arg(long, global = true)]
    proxy_epochs: Option<usize>,
    #[arg(long, global = true)]
    proxy_learning_rate: Option<f64>,
    #[arg(long, global = true)]
    proxy_l2: Option<f64>,
    /// Per-block hashed dimension of proxy features.
    #[arg(long, global = true)]
    proxy_feature_dim: Option<usize>,
    /// Train on importance selections with their weights.
    #[arg(long, global = true, action = ArgAction::Set)]
    reweight_importance: Option<bool>,
    /// Source corpus (JSONL).
    #[arg(long, global = true)]
    source: Option<PathBuf>,
    /// Target corpus (JSONL).
    #[arg(long, global = true)]
    target: Option<PathBuf>,
    /// Precomputed embeddings (JSONL or binary).
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Externally computed scores for the external method.
    #[arg(long, global = true)]
    external_scores: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Source,
    Target,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Target in vocabulary A; source half A, half B.
    Vocab,
    /// Keyword NLI task with matched, other-topic and flipped source data.
    Shift,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a JSONL corpus and write it in canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Domain assigned to records without one.
        #[arg(long, value_enum, default_value = "source")]
        domain: DomainArg,
        #[arg(long)]
        out: PathBuf,
        /// Also write corpus statistics as JSON.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Add sampled not-entailment pairs to a corpus of positives.
    Pairs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score source instances against the target with one method.
    Score {
        #[arg(long)]
        out: PathBuf,
        /// Importance weights as JSONL (importance method only).
        #[arg(long)]
        weights_out: Option<PathBuf>,
        /// Score histogram as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Turn scores into a selection manifest.
    Select {
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Importance weights for threshold selection.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, requires = "weights")]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the selected source instances as JSONL.
        #[arg(long)]
        materialize: Option<PathBuf>,
    },
    /// Lexical overlap between ranked source instances and the target.
    Diagnose {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        aggregate_out: Option<PathBuf>,
    },
    /// Train the proxy classifier on target-train plus a selection and
    /// evaluate it on the held-out splits.
    Eval {
        #[arg(long)]
        selection: Option<PathBuf>,
        /// Per-instance training weights (JSONL with uid and weight).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep methods, ratios and seeds through selection and evaluation.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary_out: Option<PathBuf>,
        /// Write `<prefix>-validation.svg` and `<prefix>-test.svg`.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Render zero-shot or one-shot prompts for every instance.
    Prompt {
        #[arg(long)]
        input: PathBuf,
        /// Corpus providing the one-shot demonstrations (defaults to the input).
        #[arg(long)]
        examples: Option<PathBuf>,
        /// Output JSONL; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic benchmark.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn at(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |e| match e {
        Error::File { .. } => CliError::runtime(e.to_string()),
        other => CliError::runtime(format!("{}: {other}", path.display())),
    }
}

/// Where each explicitly set key came from, for error messages.
#[derive(Debug, Default)]
struct Provenance(HashMap<&'static str, String>);

impl Provenance {
    fn of(&self, key: &str) -> String {
        self.0.get(key).cloned().unwrap_or_else(|| "default".into())
    }
}

fn parse_method(name: &str) -> CliResult<Method> {
    Method::from_str(name).map_err(|_| CliError::usage(format!("unknown method {name:?}")))
}

fn resolve(cli: &Cli) -> CliResult<(RunConfig, Provenance)> {
    let mut prov = Provenance::default();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?;
            let origin = format!("config file {}", path.display());
            for (key, pointer) in CONFIG_KEYS {
                if value.pointer(pointer).is_some() {
                    prov.0.insert(key, origin.clone());
                }
            }
            serde_json::from_value::<RunConfig>(value)
                .map_err(|e| CliError::usage(format!("config file {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };

    if !prov.0.contains_key("seed") {
        if let Ok(env) = std::env::var("XDS_SEED") {
            cfg.seed = env.trim().parse().map_err(|_| {
                CliError::usage(format!("XDS_SEED is not an unsigned integer: {env:?}"))
            })?;
            prov.0.insert("seed", "environment XDS_SEED".into());
        }
    }

    let s = &cli.settings;
    macro_rules! set {
        ($key:literal, $flag:literal, $opt:expr, $dst:expr) => {
            if let Some(v) = $opt.clone() {
                $dst = v;
                prov.0.insert($key, concat!("flag --", $flag).into());
            }
        };
    }
    set!("seed", "seed", s.seed, cfg.seed);
    set!("method", "method", s.method, cfg.method);
    set!("methods", "methods", s.methods, cfg.methods);
    set!("ratio", "ratio", s.ratio, cfg.ratio);
    set!("ratios", "ratios", s.ratios, cfg.ratios);
    set!("seeds", "seeds", s.seeds, cfg.seeds);
    set!(
        "negative_rate",
        "negative-rate",
        s.negative_rate,
        cfg.negative_rate
    );
    set!("intervals", "intervals", s.intervals, cfg.intervals);
    set!(
        "histogram_bins",
        "histogram-bins",
        s.histogram_bins,
        cfg.histogram_bins
    );
    set!("regulation", "regulation", s.regulation, cfg.regulation);
    set!("lm_order", "lm-order", s.lm_order, cfg.scorer.lm_order);
    set!("lm_k", "lm-k", s.lm_k, cfg.scorer.lm_k);
    set!(
        "embedding_dim",
        "embedding-dim",
        s.embedding_dim,
        cfg.scorer.embedding_dim
    );
    set!(
        "prior_correction",
        "prior-correction",
        s.prior_correction,
        cfg.scorer.classifier.prior_correction
    );
    set!(
        "importance_on_embeddings",
        "importance-on-embeddings",
        s.importance_on_embeddings,
        cfg.scorer.importance_on_embeddings
    );
    set!(
        "classifier_epochs",
        "classifier-epochs",
        s.classifier_epochs,
        cfg.scorer.classifier.epochs
    );
    set!(
        "classifier_learning_rate",
        "classifier-learning-rate",
        s.classifier_learning_rate,
        cfg.scorer.classifier.learning_rate
    );
    set!(
        "classifier_l2",
        "classifier-l2",
        s.classifier_l2,
        cfg.scorer.classifier.l2
    );
    set!(
        "proxy_epochs",
        "proxy-epochs",
        s.proxy_epochs,
        cfg.proxy.training.epochs
    );
    set!(
        "proxy_learning_rate",
        "proxy-learning-rate",
        s.proxy_learning_rate,
        cfg.proxy.training.learning_rate
    );
    set!("proxy_l2", "proxy-l2", s.proxy_l2, cfg.proxy.training.l2);
    set!(
        "reweight_importance",
        "reweight-importance",
        s.reweight_importance,
        cfg.reweight_importance
    );
    if let Some(p) = &s.source {
        cfg.paths.source = Some(p.clone());
        prov.0.insert("source", "flag --source".into());
    }
    if let Some(p) = &s.target {
        cfg.paths.target = Some(p.clone());
        prov.0.insert("target", "flag --target".into());
    }
    if let Some(p) = &s.embeddings {
        cfg.paths.embeddings = Some(p.clone());
        prov.0.insert("embeddings", "flag --embeddings".into());
    }
    if let Some(p) = &s.external_scores {
        cfg.paths.external_scores = Some(p.clone());
        prov.0
            .insert("external_scores", "flag --external-scores".into());
    }

    if s.feature_orders.is_some() || s.feature_dim.is_some() {
        let orders = s
            .feature_orders
            .clone()
            .unwrap_or_else(|| cfg.scorer.features.orders().to_vec());
        let dim = s.feature_dim.unwrap_or(cfg.scorer.features.dim());
        cfg.scorer.features =
            FeatureConfig::new(orders, dim).map_err(|e| CliError::usage(e.to_string()))?;
    }
    if let Some(dim) = s.proxy_feature_dim {
        cfg.proxy.features = FeatureConfig::new(cfg.proxy.features.orders().to_vec(), dim)
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    if let Some(mode) = &s.prompt_mode {
        cfg.prompt_mode = match mode.replace('-', "_").as_str() {
            "zero_shot" => PromptMode::ZeroShot,
            "one_shot" => PromptMode::OneShot,
            _ => return Err(CliError::usage(format!("unknown prompt mode {mode:?}"))),
        };
    }
    if let Some(o) = &s.external_orientation {
        cfg.scorer.external_orientation = Orientation::from_str(o)
            .map_err(|_| CliError::usage(format!("unknown orientation {o:?}")))?;
    }
    if let Some(a) = &s.aggregator {
        cfg.scorer.aggregator = match a.replace('-', "_").as_str() {
            "max" => Aggregator::Max,
            "mean_top_k" => Aggregator::MeanTopK(s.top_k.unwrap_or(5)),
            _ => return Err(CliError::usage(format!("unknown aggregator {a:?}"))),
        };
        prov.0.insert("aggregator", "flag --aggregator".into());
    }
    if let Some(k) = s.top_k {
        match cfg.scorer.aggregator {
            Aggregator::MeanTopK(_) => cfg.scorer.aggregator = Aggregator::MeanTopK(k),
            Aggregator::Max => {
                return Err(CliError::usage(format!(
                    "flag --top-k conflicts with aggregator max ({})",
                    prov.of("aggregator")
                )))
            }
        }
    }

    cfg.method = parse_method(&cfg.method)?.as_str().into();
    cfg.methods = cfg
        .methods
        .iter()
        .map(|m| parse_method(m).map(|m| m.as_str().to_string()))
        .collect::<CliResult<_>>()?;
    if cfg.tokenizer != TOKENIZER {
        return Err(CliError::usage(format!(
            "unsupported tokenizer {:?} ({}); only {TOKENIZER:?} is available",
            cfg.tokenizer,
            prov.of("tokenizer")
        )));
    }
    check_ratio(cfg.ratio, &prov.of("ratio"))?;
    for &r in &cfg.ratios {
        check_ratio(r, &prov.of("ratios"))?;
    }
    if !(0.0..=1.0).contains(&cfg.negative_rate) {
        return Err(CliError::usage(format!(
            "negative rate must lie in [0, 1], got {} ({})",
            cfg.negative_rate,
            prov.of("negative_rate")
        )));
    }
    Ok((cfg, prov))
}

const CONFIG_KEYS: [(&str, &str); 24] = [
    ("seed", "/seed"),
    ("tokenizer", "/tokenizer"),
    ("method", "/method"),
    ("methods", "/methods"),
    ("ratio", "/ratio"),
    ("ratios", "/ratios"),
    ("seeds", "/seeds"),
    ("negative_rate", "/negative_rate"),
    ("intervals", "/intervals"),
    ("histogram_bins", "/histogram_bins"),
    ("regulation", "/regulation"),
    ("lm_order", "/scorer/lm_order"),
    ("lm_k", "/scorer/lm_k"),
    ("embedding_dim", "/scorer/embedding_dim"),
    ("aggregator", "/scorer/aggregator"),
    ("prior_correction", "/scorer/classifier/prior_correction"),
    (
        "importance_on_embeddings",
        "/scorer/importance_on_embeddings",
    ),
    ("classifier_epochs", "/scorer/classifier/epochs"),
    ("proxy_epochs", "/proxy/training/epochs"),
    ("reweight_importance", "/reweight_importance"),
    ("source", "/paths/source"),
    ("target", "/paths/target"),
    ("embeddings", "/paths/embeddings"),
    ("external_scores", "/paths/external_scores"),
];

fn check_ratio(r: f64, origin: &str) -> CliResult<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "ratio must lie in (0, 1], got {r} ({origin})"
        )))
    }
}

/// Settings that are individually valid but contradict each other.
fn check_conflicts(cfg: &RunConfig, prov: &Provenance, method: Method) -> CliResult<()> {
    if method == Method::External && cfg.paths.external_scores.is_none() {
        return Err(CliError::usage(format!(
            "method external ({}) needs external scores, but none are set ({})",
            prov.of("method"),
            prov.of("external_scores")
        )));
    }
    if method == Method::Importance
        && cfg.scorer.importance_on_embeddings
        && cfg.paths.embeddings.is_none()
    {
        return Err(CliError::usage(format!(
            "importance on embeddings ({}) needs an embeddings file, but none is set ({})",
            prov.of("importance_on_embeddings"),
            prov.of("embeddings")
        )));
    }
    if let Aggregator::MeanTopK(0) = cfg.scorer.aggregator {
        return Err(CliError::usage(format!(
            "mean-top-k needs k >= 1 ({})",
            prov.of("aggregator")
        )));
    }
    Ok(())
}

fn created_at() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

struct Ctx {
    cfg: RunConfig,
    prov: Provenance,
    fingerprint: String,
    command: &'static str,
}

impl Ctx {
    fn require(&self, path: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
        path.clone()
            .ok_or_else(|| CliError::usage(format!("{} needs --{flag}", self.command)))
    }

    fn source(&self) -> CliResult<Corpus> {
        let p = self.require(&self.cfg.paths.source, "source")?;
        load_corpus(&p, Domain::Source).map_err(at(&p))
    }

    fn target(&self) -> CliResult<Corpus> {
        let p = self.require(&self.cfg.paths.target, "target")?;
        load_corpus(&p, Domain::Target).map_err(at(&p))
    }

    fn seed(&self, purpose: &str) -> u64 {
        derive_seed(self.cfg.seed, &format!("{}/{purpose}", self.command))
    }

    /// Writes `<artifact>.config.json`.
    fn sidecar(&self, artifact: &Path, metadata: Value) -> CliResult<()> {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".config.json");
        let doc = json!({
            "command": self.command,
            "artifact": artifact.file_name().map(|n| n.to_string_lossy().into_owned()),
            "fingerprint": self.fingerprint,
            "config": self.cfg,
            "metadata": metadata,
        });
        write_json(Path::new(&name), &doc)
    }
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn log(command: &str, msg: impl AsRef<str>) {
    eprintln!("xds {command}: {}", msg.as_ref());
}

fn read_weights(path: &Path) -> CliResult<HashMap<String, f64>> {
    let file =
        File::open(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let w: ImportanceWeight = serde_json::from_str(&line)
            .map_err(|e| CliError::runtime(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        out.insert(w.uid, w.weight);
    }
    Ok(out)
}

fn read_weight_records(path: &Path) -> CliResult<Vec<ImportanceWeight>> {
    let file =
        File::open(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| {
                CliError::runtime(format!("{}: line {}: {e}", path.display(), i + 1))
            })?,
        );
    }
    Ok(out)
}

type OwnedInputs = (
    Option<crate::embedding::EmbeddingStore>,
    Option<HashMap<String, f64>>,
);

fn score_inputs(ctx: &Ctx) -> CliResult<OwnedInputs> {
    let embeddings = match &ctx.cfg.paths.embeddings {
        Some(p) => Some(load_embeddings(p).map_err(at(p))?),
        None => None,
    };
    let external = match &ctx.cfg.paths.external_scores {
        Some(p) => {
            let f =
                File::open(p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
            Some(read_external_scores(BufReader::new(f)).map_err(at(p))?)
        }
        None => None,
    };
    Ok((embeddings, external))
}

fn run(cli: Cli) -> CliResult<()> {
    let (cfg, prov) = resolve(&cli)?;
    let command = match &cli.command {
        Command::Ingest { .. } => "ingest",
        Command::Pairs { .. } => "pairs",
        Command::Score { .. } => "score",
        Command::Select { .. } => "select",
        Command::Diagnose { .. } => "diagnose",
        Command::Eval { .. } => "eval",
        Command::Sweep { .. } => "sweep",
        Command::Prompt { .. } => "prompt",
        Command::Synth { .. } => "synth",
    };
    let ctx = Ctx {
        fingerprint: fingerprint(&cfg),
        cfg,
        prov,
        command,
    };
    match cli.command {
        Command::Ingest {
            input,
            domain,
            out,
            stats,
        } => {
            let domain = match domain {
                DomainArg::Source => Domain::Source,
                DomainArg::Target => Domain::Target,
            };
            let corpus = load_corpus(&input, domain).map_err(at(&input))?;
            let st = corpus_stats(&corpus);
            ensure_parent(&out)?;
            save_corpus(&corpus, &out).map_err(at(&out))?;
            ctx.sidecar(&out, json!({ "stats": st }))?;
            if let Some(path) = stats {
                write_json(
                    &path,
                    &json!({ "fingerprint": ctx.fingerprint, "stats": st }),
                )?;
            }
            log(
                command,
                format!("{} instances -> {}", st.instance_count, out.display()),
            );
        }
        Command::Pairs { input, out } => {
            let positives = load_corpus(&input, Domain::Source).map_err(at(&input))?;
            let pairs = build_pairs(&positives, ctx.cfg.negative_rate, ctx.seed("negatives"))?;
            ensure_parent(&out)?;
            save_corpus(&pairs, &out).map_err(at(&out))?;
            let negatives = pairs.len() - positives.len();
            ctx.sidecar(
                &out,
                json!({ "positives": positives.len(), "negatives": negatives }),
            )?;
            log(
                command,
                format!(
                    "{} positives + {negatives} negatives -> {}",
                    positives.len(),
                    out.display()
                ),
            );
        }
        Command::Score {
            out,
            weights_out,
            histogram,
        } => {
            let method = parse_method(&ctx.cfg.method)?;
            if method == Method::Full {
                return Err(CliError::usage(
                    "method full has no scores; use `select --method full`",
                ));
            }
            check_conflicts(&ctx.cfg, &ctx.prov, method)?;
            if weights_out.is_some() && method != Method::Importance {
                return Err(CliError::usage(format!(
                    "--weights-out needs method importance, got {method} ({})",
                    ctx.prov.of("method")
                )));
            }
            let source = ctx.source()?;
            let target = ctx.target()?;
            let (emb, ext) = score_inputs(&ctx)?;
            let inputs = ScoreInputs {
                embeddings: emb.as_ref(),
                external: ext.as_ref(),
            };
            let scored = score_source(
                method,
                &source,
                &target,
                &ctx.cfg.scorer,
                inputs,
                ctx.seed("scorer"),
            )?;
            ensure_parent(&out)?;
            save_records(&scored.records, &out).map_err(at(&out))?;
            ctx.sidecar(
                &out,
                json!({ "method": method, "records": scored.records.len() }),
            )?;
            if let (Some(path), Some(weights)) = (&weights_out, &scored.weights) {
                let mut w = create(path)?;
                for rec in weights {
                    serde_json::to_writer(&mut w, rec).map_err(Error::from)?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
                ctx.sidecar(path, json!({ "method": method, "records": weights.len() }))?;
            }
            if let Some(path) = &histogram {
                let bins = score_histogram(&scored.records, ctx.cfg.histogram_bins)?;
                write_histogram_csv(&bins, create(path)?)?;
                ctx.sidecar(path, json!({ "method": method, "bins": bins.len() }))?;
            }
            log(
                command,
                format!(
                    "{} {method} scores -> {}",
                    scored.records.len(),
                    out.display()
                ),
            );
        }
        Command::Select {
            scores,
            weights,
            threshold,
            out,
            materialize: mat,
        } => {
            let method = parse_method(&ctx.cfg.method)?;
            let manifest = if let (Some(wpath), Some(tau)) = (&weights, threshold) {
                let ws = read_weight_records(wpath)?;
                if ws.is_empty() {
                    return Err(CliError::runtime(format!(
                        "{}: no weights",
                        wpath.display()
                    )));
                }
                let selected =
                    threshold_filter(&ws, tau).map_err(|e| CliError::usage(e.to_string()))?;
                SelectionManifest {
                    method: Method::Importance,
                    ratio: selected.len() as f64 / ws.len() as f64,
                    seed: None,
                    selected,
                    fingerprint: String::new(),
                    created_at: None,
                }
            } else if let Some(path) = &scores {
                let records = load_records(path).map_err(at(path))?;
                select_top(&records, ctx.cfg.ratio)?
            } else {
                match method {
                    Method::Random => {
                        select_random(&ctx.source()?, ctx.cfg.ratio, ctx.seed("random"))?
                    }
                    Method::Full => select_full(&ctx.source()?),
                    other => {
                        return Err(CliError::usage(format!(
                            "select with method {other} ({}) needs --scores",
                            ctx.prov.of("method")
                        )))
                    }
                }
            };
            let manifest = manifest
                .with_fingerprint(ctx.fingerprint.clone())
                .with_created_at(created_at());
            write_json(&out, &manifest)?;
            ctx.sidecar(&out, json!({ "selected": manifest.len() }))?;
            if let Some(path) = &mat {
                let sub = materialize(&manifest, &ctx.source()?)?;
                ensure_parent(path)?;
                save_corpus(&sub, path).map_err(at(path))?;
                ctx.sidecar(path, json!({ "selected": sub.len() }))?;
            }
            log(
                command,
                format!(
                    "{} {} uids -> {}",
                    manifest.len(),
                    manifest.method,
                    out.display()
                ),
            );
        }
        Command::Diagnose {
            scores,
            out,
            aggregate_out,
        } => {
            let intervals = intervals_from_edges(&ctx.cfg.intervals)
                .map_err(|e| CliError::usage(format!("{e} ({})", ctx.prov.of("intervals"))))?;
            let source = ctx.source()?;
            let target = ctx.target()?;
            let records = load_records(&scores).map_err(at(&scores))?;
            let report = channel_report(&source, &target, &records, &intervals)?;
            write_records_csv(&report.records, create(&out)?)?;
            let meta = json!({ "bleu2_variant": BLEU2_VARIANT, "intervals": ctx.cfg.intervals });
            ctx.sidecar(&out, meta.clone())?;
            if let Some(path) = &aggregate_out {
                write_aggregates_csv(&report.aggregates, create(path)?)?;
                ctx.sidecar(path, meta)?;
            }
            log(
                command,
                format!("{} overlap rows -> {}", report.records.len(), out.display()),
            );
        }
        Command::Eval {
            selection,
            weights,
            out,
        } => {
            let target = ctx.target()?;
            let train = target.split(Split::Train);
            let mut corpus = train.clone();
            let (mut method, mut ratio, mut n_source) = ("target_only".to_string(), 0.0, 0);
            if let Some(path) = &selection {
                let manifest = SelectionManifest::load(path).map_err(at(path))?;
                let selected = materialize(&manifest, &ctx.source()?)?;
                let uids = corpus
                    .uid_index()
                    .into_keys()
                    .map(str::to_string)
                    .collect::<std::collections::HashSet<_>>();
                if let Some(dup) = selected.iter().find(|i| uids.contains(&i.uid)) {
                    return Err(CliError::runtime(format!(
                        "uid {:?} appears in both target and source",
                        dup.uid
                    )));
                }
                method = manifest.method.to_string();
                ratio = manifest.ratio;
                n_source = selected.len();
                corpus.instances.extend(selected.instances);
            }
            let weight_map = match &weights {
                Some(p) => Some(read_weights(p)?),
                None => None,
            };
            let proxy_cfg = ProxyConfig {
                training: crate::sgd::SgdConfig {
                    seed: ctx.seed("proxy"),
                    ..ctx.cfg.proxy.training.clone()
                },
                ..ctx.cfg.proxy.clone()
            };
            let model = train_proxy(&corpus, weight_map.as_ref(), &proxy_cfg)?;
            let mut reports = Vec::new();
            for split in [Split::Validation, Split::Test] {
                let part = target.split(split);
                if part.is_empty() {
                    continue;
                }
                let mut rep = evaluate(&model, &part)?;
                rep.n_train_target = train.len();
                rep.n_train_source_selected = n_source;
                rep.method = method.clone();
                rep.ratio = ratio;
                rep.seed = ctx.cfg.seed;
                let mut v = serde_json::to_value(&rep).map_err(Error::from)?;
                v["split"] = json!(split);
                reports.push(v);
            }
            if reports.is_empty() {
                return Err(CliError::runtime(
                    "target corpus has no validation or test split",
                ));
            }
            write_json(
                &out,
                &json!({ "fingerprint": ctx.fingerprint, "reports": reports }),
            )?;
            ctx.sidecar(&out, json!({ "train_instances": corpus.len() }))?;
            log(
                command,
                format!("{} reports -> {}", reports.len(), out.display()),
            );
        }
        Command::Sweep {
            out,
            summary_out,
            svg,
        } => {
            let methods: Vec<Method> = ctx
                .cfg
                .methods
                .iter()
                .map(|m| parse_method(m))
                .collect::<CliResult<_>>()?;
            for &m in &methods {
                if m == Method::Full {
                    return Err(CliError::usage(format!(
                        "full is always included as a baseline; remove it from methods ({})",
                        ctx.prov.of("methods")
                    )));
                }
                check_conflicts(&ctx.cfg, &ctx.prov, m)?;
            }
            let source = ctx.source()?;
            let target = ctx.target()?;
            let (emb, ext) = score_inputs(&ctx)?;
            let inputs = ScoreInputs {
                embeddings: emb.as_ref(),
                external: ext.as_ref(),
            };
            let config = SweepConfig {
                methods,
                ratios: ctx.cfg.ratios.clone(),
                seeds: if ctx.cfg.seeds.is_empty() {
                    vec![ctx.cfg.seed]
                } else {
                    ctx.cfg.seeds.clone()
                },
                scorer: ctx.cfg.scorer.clone(),
                proxy: ctx.cfg.proxy.clone(),
                reweight_importance: ctx.cfg.reweight_importance,
            };
            let result = run_sweep(&target, &source, &config, inputs)?;
            write_sweep_csv(&result, create(&out)?)?;
            ctx.sidecar(&out, json!({ "rows": result.rows.len() }))?;
            if let Some(path) = &summary_out {
                write_summary_csv(&result, create(path)?)?;
                ctx.sidecar(path, json!({ "rows": result.summary.len() }))?;
            }
            if let Some(prefix) = &svg {
                for split in [Split::Validation, Split::Test] {
                    let mut name = prefix.as_os_str().to_owned();
                    name.push(format!("-{split}.svg"));
                    let path = PathBuf::from(name);
                    let mut w = create(&path)?;
                    w.write_all(render_svg(&result, split).as_bytes())?;
                    w.flush()?;
                }
            }
            log(
                command,
                format!("{} rows -> {}", result.rows.len(), out.display()),
            );
        }
        Command::Prompt {
            input,
            examples,
            out,
        } => {
            let corpus = load_corpus(&input, Domain::Target).map_err(at(&input))?;
            let demos = match (&examples, ctx.cfg.prompt_mode) {
                (_, PromptMode::ZeroShot) => None,
                (Some(p), PromptMode::OneShot) => {
                    Some(load_corpus(p, Domain::Target).map_err(at(p))?)
                }
                (None, PromptMode::OneShot) => Some(corpus.clone()),
            };
            let pick = |label: Label| {
                demos
                    .as_ref()
                    .and_then(|d| d.iter().find(|i| i.label == label))
            };
            let (pos, neg) = (pick(Label::Entailment), pick(Label::NotEntailment));
            if demos.is_some() && (pos.is_none() || neg.is_none()) {
                return Err(CliError::runtime(
                    "one-shot prompts need an entailment and a not-entailment example",
                ));
            }
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(create(p)?),
                None => Box::new(BufWriter::new(io::stdout().lock())),
            };
            for inst in &corpus {
                let prompt =
                    render_prompt(inst, &ctx.cfg.regulation, ctx.cfg.prompt_mode, pos, neg)?;
                serde_json::to_writer(&mut w, &json!({ "uid": inst.uid, "prompt": prompt }))
                    .map_err(Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            if let Some(p) = &out {
                ctx.sidecar(p, json!({ "prompts": corpus.len() }))?;
                log(
                    command,
                    format!("{} prompts -> {}", corpus.len(), p.display()),
                );
            }
        }
        Command::Synth { kind, out_dir } => {
            fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::runtime(format!("{}: {e}", out_dir.display())))?;
            let seed = ctx.seed("data");
            let (source, target) = match kind {
                SynthKind::Vocab => {
                    let b = vocab_benchmark(200, 500, 500, seed);
                    (b.source, b.target)
                }
                SynthKind::Shift => {
                    let b = shift_benchmark(&ShiftParams::default(), seed);
                    (b.source, b.target)
                }
            };
            for (name, corpus) in [("source.jsonl", &source), ("target.jsonl", &target)] {
                let path = out_dir.join(name);
                save_corpus(corpus, &path).map_err(at(&path))?;
                ctx.sidecar(&path, json!({ "instances": corpus.len() }))?;
            }
            log(
                command,
                format!(
                    "{} source + {} target instances -> {}",
                    source.len(),
                    target.len(),
                    out_dir.display()
                ),
            );
        }
    }
    Ok(())
}

/// Parses `args`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 for runtime or data errors, 2 for usage errors. Errors are
/// reported as one `error: ...` line on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    let jobs = cli.jobs;
    match par::with_jobs(jobs, move || run(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            e.code
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("xds").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"seed": 4, "ratio": 0.2, "scorer": {"lm_order": 2}}"#,
        )
        .unwrap();
        let cli = parse(&[
            "--config",
            path.to_str().unwrap(),
            "--ratio",
            "0.1",
            "select",
            "--out",
            "x",
        ]);
        let (cfg, prov) = resolve(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.ratio, cfg.scorer.lm_order), (4, 0.1, 2));
        assert_eq!(prov.of("ratio"), "flag --ratio");
        assert!(prov.of("seed").starts_with("config file"));
    }

    #[test]
    fn unknown_method_is_usage_error() {
        let cli = parse(&["--method", "bogus", "score", "--out", "x"]);
        let err = resolve(&cli).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.starts_with("unknown method"));
    }

    #[test]
    fn conflicts_name_both_sources() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"scorer": {"aggregator": {"kind": "max"}}}"#).unwrap();
        let cli = parse(&[
            "--config",
            path.to_str().unwrap(),
            "--top-k",
            "3",
            "score",
            "--out",
            "x",
        ]);
        let err = resolve(&cli).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(
            err.message.contains("flag --top-k") && err.message.contains("config file"),
            "{}",
            err.message
        );

        let cli = parse(&["--method", "external", "score", "--out", "x"]);
        let (cfg, prov) = resolve(&cli).unwrap();
        let err = check_conflicts(&cfg, &prov, Method::External).unwrap_err();
        assert!(
            err.message.contains("flag --method") && err.message.contains("default"),
            "{}",
            err.message
        );
    }

    #[test]
    fn fingerprint_ignores_nothing_but_changes_with_settings() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(fingerprint(&a), fingerprint(&b));
        b.scorer.lm_k = 1.0;
        assert_ne!(fingerprint(&a), fingerprint(&b));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"sede": 1}"#).unwrap();
        let cli = parse(&["--config", path.to_str().unwrap(), "select", "--out", "x"]);
        assert_eq!(resolve(&cli).unwrap_err().code, 2);
        let cli = parse(&["--ratio", "1.5", "select", "--out", "x"]);
        assert_eq!(resolve(&cli).unwrap_err().code, 2);
    }
}
