//! Moore–Lewis cross-entropy difference scoring, and ingestion of externally
//! computed scores.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lm::{train_lm, NgramModel};
use crate::par;
use crate::score::{ranked, Method, Orientation, ScoreRecord};
use crate::textproc::TokenSeq;

/// Trains the in-domain and general-domain models on instance text.
pub fn train_domain_lms(
    source: &Corpus,
    target: &Corpus,
    order: usize,
    k: f64,
) -> Result<(NgramModel, NgramModel)> {
    let tgt: Vec<TokenSeq> = par::map(&target.instances, |i| i.tokens());
    let src: Vec<TokenSeq> = par::map(&source.instances, |i| i.tokens());
    Ok((train_lm(&tgt, order, k)?, train_lm(&src, order, k)?))
}

/// `score(x) = H_target(x) - H_source(x)` over `premise ⟨sep⟩ hypothesis`,
/// ranked ascending (most target-like first). Records keep input order.
pub fn score_moore_lewis(
    source: &Corpus,
    lm_target: &NgramModel,
    lm_source: &NgramModel,
) -> Vec<ScoreRecord> {
    let scores = par::map(&source.instances, |inst| {
        let toks = inst.tokens();
        lm_target.cross_entropy(&toks) - lm_source.cross_entropy(&toks)
    });
    ranked(
        source.iter().map(|i| i.uid.clone()).zip(scores),
        Method::MooreLewis,
        Orientation::Asc,
    )
}

/// Parses `{"uid": ..., "score": ...}` lines.
pub fn read_external_scores<R: BufRead>(reader: R) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(line_no, format!("invalid JSON: {e}")))?;
        let uid = value
            .get("uid")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse(line_no, "missing string field uid"))?;
        let score = match value.get("score") {
            Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(_) => return Err(Error::parse(line_no, "score is not numeric")),
            None => return Err(Error::parse(line_no, "missing field score")),
        };
        if out.insert(uid.to_string(), score).is_some() {
            return Err(Error::parse(line_no, format!("duplicate uid {uid:?}")));
        }
    }
    Ok(out)
}

/// Ranks source instances by scores supplied from outside (for example
/// transformer cross-entropies or encoder similarities). Every source uid
/// must have a score; scores for uids not in `source` are ignored.
pub fn score_external_map(
    source: &Corpus,
    scores: &HashMap<String, f64>,
    orientation: Orientation,
) -> Result<Vec<ScoreRecord>> {
    let missing: Vec<String> = source
        .iter()
        .filter(|i| !scores.contains_key(&i.uid))
        .map(|i| i.uid.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingUids(missing));
    }
    let mut seen = HashSet::new();
    Ok(ranked(
        source
            .iter()
            .filter(|i| seen.insert(i.uid.as_str()))
            .map(|i| (i.uid.clone(), scores[&i.uid])),
        Method::External,
        orientation,
    ))
}

pub fn score_external(
    source: &Corpus,
    scores_path: impl AsRef<Path>,
    orientation: Orientation,
) -> Result<Vec<ScoreRecord>> {
    let path = scores_path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let scores = read_external_scores(BufReader::new(file))?;
    score_external_map(source, &scores, orientation)
}
