//! NLI instances, corpus files, negative pairing and prompt rendering.
//!
//! A corpus file is UTF-8 JSON Lines, one instance per line, with the fields
//! `uid`, `pair_id`, `premise`, `hypothesis`, `label`, `domain`, `split` and
//! `meta`. Fields outside that set are kept in `meta` on load.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::textproc::{fnv1a64, pair_tokens, TokenSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailment,
    NotEntailment,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::param(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"), other
                    ))),
                }
            }
        }
    };
}

str_enum!(Label { Entailment => "entailment", NotEntailment => "not_entailment" });
str_enum!(Domain { Source => "source", Target => "target" });
str_enum!(Split { Train => "train", Validation => "validation", Test => "test" });

/// One premise/hypothesis pair. The premise is the requirement text and the
/// hypothesis the agreement or policy statement checked against it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub uid: String,
    pub pair_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    pub domain: Domain,
    pub split: Split,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Instance {
    pub fn new(
        uid: impl Into<String>,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
        label: Label,
    ) -> Self {
        Instance {
            uid: uid.into(),
            pair_id: String::new(),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            label,
            domain: Domain::Source,
            split: Split::Train,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_pair_id(mut self, pair_id: impl Into<String>) -> Self {
        self.pair_id = pair_id.into();
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.uid.is_empty() {
            return Err(Error::param("instance uid is empty"));
        }
        if self.premise.trim().is_empty() {
            return Err(Error::param(format!(
                "instance {:?}: empty premise",
                self.uid
            )));
        }
        if self.hypothesis.trim().is_empty() {
            return Err(Error::param(format!(
                "instance {:?}: empty hypothesis",
                self.uid
            )));
        }
        Ok(())
    }

    /// Tokens of the full instance, `premise ⟨sep⟩ hypothesis`.
    pub fn tokens(&self) -> TokenSeq {
        pair_tokens(&self.premise, &self.hypothesis)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub instances: Vec<Instance>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, instances: Vec<Instance>) -> Self {
        Corpus {
            name: name.into(),
            instances,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    pub fn uid_index(&self) -> HashMap<&str, usize> {
        self.instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.uid.as_str(), i))
            .collect()
    }

    /// Instances of one split, file order kept.
    pub fn split(&self, split: Split) -> Corpus {
        Corpus {
            name: format!("{}:{}", self.name, split),
            instances: self
                .instances
                .iter()
                .filter(|i| i.split == split)
                .cloned()
                .collect(),
        }
    }

    pub fn has_both_labels(&self) -> bool {
        let mut seen = [false; 2];
        for inst in &self.instances {
            seen[inst.label as usize] = true;
        }
        seen[0] && seen[1]
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Instance;
    type IntoIter = std::slice::Iter<'a, Instance>;

    fn into_iter(self) -> Self::IntoIter {
        self.instances.iter()
    }
}

const KNOWN_FIELDS: [&str; 8] = [
    "uid",
    "pair_id",
    "premise",
    "hypothesis",
    "label",
    "domain",
    "split",
    "meta",
];

fn field_str<'a>(obj: &'a Map<String, Value>, line: usize, field: &str) -> Result<Option<&'a str>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(Error::parse(
            line,
            format!("field {field} must be a string"),
        )),
    }
}

fn required_str<'a>(obj: &'a Map<String, Value>, line: usize, field: &str) -> Result<&'a str> {
    field_str(obj, line, field)?.ok_or_else(|| Error::parse(line, format!("missing field {field}")))
}

fn parse_enum<T: FromStr>(obj: &Map<String, Value>, line: usize, field: &str) -> Result<Option<T>> {
    field_str(obj, line, field)?
        .map(|s| {
            s.parse()
                .map_err(|_| Error::parse(line, format!("invalid value {s:?} for field {field}")))
        })
        .transpose()
}

fn meta_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_instance(text: &str, line: usize, default_domain: Domain) -> Result<Instance> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::parse(line, format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(Error::parse(line, "record is not a JSON object"));
    };

    let uid = required_str(&obj, line, "uid")?;
    if uid.is_empty() {
        return Err(Error::parse(line, "empty field uid"));
    }
    let premise = required_str(&obj, line, "premise")?;
    let hypothesis = required_str(&obj, line, "hypothesis")?;
    for (field, text) in [("premise", premise), ("hypothesis", hypothesis)] {
        if text.trim().is_empty() {
            return Err(Error::parse(line, format!("empty field {field}")));
        }
    }
    let label: Label = parse_enum(&obj, line, "label")?
        .ok_or_else(|| Error::parse(line, "missing field label"))?;
    let domain = parse_enum(&obj, line, "domain")?.unwrap_or(default_domain);
    let split = parse_enum(&obj, line, "split")?.unwrap_or(Split::Train);

    let mut meta = BTreeMap::new();
    match obj.get("meta") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            for (k, v) in m {
                meta.insert(k.clone(), meta_value(v));
            }
        }
        Some(_) => return Err(Error::parse(line, "field meta must be an object")),
    }
    for (k, v) in &obj {
        if !KNOWN_FIELDS.contains(&k.as_str()) {
            meta.entry(k.clone()).or_insert_with(|| meta_value(v));
        }
    }

    Ok(Instance {
        uid: uid.to_string(),
        pair_id: field_str(&obj, line, "pair_id")?
            .unwrap_or_default()
            .to_string(),
        premise: premise.to_string(),
        hypothesis: hypothesis.to_string(),
        label,
        domain,
        split,
        meta,
    })
}

/// Reads JSON Lines. Records without a `domain` field get `default_domain`;
/// records without `split` are `train`. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, name: &str, default_domain: Domain) -> Result<Corpus> {
    let mut instances = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = parse_instance(&line, line_no, default_domain)?;
        if let Some(&first) = seen.get(&inst.uid) {
            return Err(Error::DuplicateUid {
                uid: inst.uid,
                first,
                second: line_no,
            });
        }
        seen.insert(inst.uid.clone(), line_no);
        instances.push(inst);
    }
    Ok(Corpus::new(name, instances))
}

pub fn load_corpus(path: impl AsRef<Path>, default_domain: Domain) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_corpus(BufReader::new(file), &name, default_domain)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    for inst in &corpus.instances {
        serde_json::to_writer(&mut writer, inst)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_corpus(corpus, BufWriter::new(file))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub instance_count: usize,
    pub unique_pair_ids: usize,
    pub unique_premises: usize,
    pub unique_hypotheses: usize,
}

/// Distinct counts use exact equality after trimming surrounding whitespace.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut pair_ids = HashSet::new();
    let mut premises = HashSet::new();
    let mut hypotheses = HashSet::new();
    for inst in corpus {
        pair_ids.insert(inst.pair_id.trim());
        premises.insert(inst.premise.trim());
        hypotheses.insert(inst.hypothesis.trim());
    }
    CorpusStats {
        instance_count: corpus.len(),
        unique_pair_ids: pair_ids.len(),
        unique_premises: premises.len(),
        unique_hypotheses: hypotheses.len(),
    }
}

/// Uid of a sampled negative: `neg-{hypothesis uid}-{fnv1a64(premise) as hex}`.
pub fn negative_uid(hypothesis_uid: &str, premise: &str) -> String {
    format!(
        "neg-{hypothesis_uid}-{:016x}",
        fnv1a64(premise.trim().as_bytes())
    )
}

/// Adds sampled `not_entailment` pairs to a corpus of positives.
///
/// Within each split (splits are paired independently), every unique
/// hypothesis is crossed with every unique premise it is not paired with in
/// any positive; each such combination becomes a negative with probability
/// `negative_rate`, one Bernoulli draw per combination from a generator
/// seeded with `seed`. Hypotheses and premises are visited in order of first
/// appearance. The output lists the positives unchanged, then the negatives
/// in generation order.
pub fn build_pairs(positives: &Corpus, negative_rate: f64, seed: u64) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&negative_rate) {
        return Err(Error::param(format!(
            "negative rate must lie in [0, 1], got {negative_rate}"
        )));
    }
    if let Some(bad) = positives.iter().find(|i| i.label != Label::Entailment) {
        return Err(Error::param(format!(
            "build_pairs expects only entailment instances; {:?} is {}",
            bad.uid, bad.label
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = positives.instances.clone();
    let mut uids: HashSet<String> = positives.iter().map(|i| i.uid.clone()).collect();

    let mut splits: Vec<Split> = Vec::new();
    for inst in positives {
        if !splits.contains(&inst.split) {
            splits.push(inst.split);
        }
    }

    for split in splits {
        let members: Vec<&Instance> = positives.iter().filter(|i| i.split == split).collect();

        let mut hypotheses: Vec<&Instance> = Vec::new();
        let mut seen_h = HashSet::new();
        let mut premises: Vec<&str> = Vec::new();
        let mut seen_p = HashSet::new();
        let mut matched: HashSet<(&str, &str)> = HashSet::new();
        for inst in &members {
            let (p, h) = (inst.premise.trim(), inst.hypothesis.trim());
            if seen_h.insert(h) {
                hypotheses.push(inst);
            }
            if seen_p.insert(p) {
                premises.push(p);
            }
            matched.insert((h, p));
        }

        for h_inst in &hypotheses {
            let h = h_inst.hypothesis.trim();
            for &p in &premises {
                if matched.contains(&(h, p)) {
                    continue;
                }
                if !rng.gen_bool(negative_rate) {
                    continue;
                }
                let uid = negative_uid(&h_inst.uid, p);
                if !uids.insert(uid.clone()) {
                    return Err(Error::param(format!("negative uid collision: {uid}")));
                }
                out.push(Instance {
                    uid,
                    pair_id: h_inst.pair_id.clone(),
                    premise: p.to_string(),
                    hypothesis: h_inst.hypothesis.clone(),
                    label: Label::NotEntailment,
                    domain: h_inst.domain,
                    split,
                    meta: BTreeMap::new(),
                });
            }
        }
    }

    Ok(Corpus::new(positives.name.clone(), out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    OneShot,
}

pub const ZERO_SHOT_TEMPLATE: &str = include_str!("templates/zero_shot.txt");
pub const ONE_SHOT_TEMPLATE: &str = include_str!("templates/one_shot.txt");

/// Single-pass `{name}` substitution, so substituted text is never rescanned.
fn fill_template(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let hit = tail.find('}').and_then(|close| {
            let name = &tail[1..close];
            slots
                .iter()
                .find(|(slot, _)| *slot == name)
                .map(|(_, value)| (close, *value))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders the zero-shot or one-shot entailment prompt for `instance`. One-shot
/// requires a positive and a negative demonstration. The prompt ends with
/// `Answer:` and no trailing newline.
pub fn render_prompt(
    instance: &Instance,
    regulation: &str,
    mode: PromptMode,
    positive_example: Option<&Instance>,
    negative_example: Option<&Instance>,
) -> Result<String> {
    instance.validate()?;
    match mode {
        PromptMode::ZeroShot => Ok(fill_template(
            ZERO_SHOT_TEMPLATE,
            &[
                ("regulation", regulation),
                ("premise", &instance.premise),
                ("hypothesis", &instance.hypothesis),
            ],
        )),
        PromptMode::OneShot => {
            let (Some(pos), Some(neg)) = (positive_example, negative_example) else {
                return Err(Error::param(
                    "one-shot prompts need a positive and a negative example",
                ));
            };
            pos.validate()?;
            neg.validate()?;
            Ok(fill_template(
                ONE_SHOT_TEMPLATE,
                &[
                    ("regulation", regulation),
                    ("positive_example_premise", &pos.premise),
                    ("positive_example_hypothesis", &pos.hypothesis),
                    ("negative_example_premise", &neg.premise),
                    ("negative_example_hypothesis", &neg.hypothesis),
                    ("premise", &instance.premise),
                    ("hypothesis", &instance.hypothesis),
                ],
            ))
        }
    }
}
