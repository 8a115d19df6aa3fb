//! Turning rankings into selections, and the manifests that record them.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Instance};
use crate::error::{Error, Result};
use crate::score::{by_rank, check_ranking, Method, ScoreRecord};

/// Selection ratios swept by default: 1, 5, 10, 20, 50, 75, 80 and 90 percent.
pub const RATIO_GRID: [f64; 8] = [0.01, 0.05, 0.10, 0.20, 0.50, 0.75, 0.80, 0.90];

/// Record of one selection run. `created_at` is informational and is not part
/// of the fingerprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub method: Method,
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub selected: Vec<String>,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<u64>,
}

impl SelectionManifest {
    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.fingerprint = fingerprint.into();
        self
    }

    pub fn with_created_at(mut self, unix_seconds: u64) -> Self {
        self.created_at = Some(unix_seconds);
        self
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "ratio must lie in (0, 1], got {ratio}"
        )))
    }
}

/// `max(1, floor(ratio * n))`, capped at `n`. A relative tolerance of 1e-9
/// absorbs binary rounding, so 0.29 of 100 is 29 rather than 28.
pub fn selection_size(n: usize, ratio: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = ratio * n as f64;
    let k = (raw + raw.abs() * 1e-9).floor() as usize;
    k.clamp(1, n)
}

/// Uids ranked `1..=selection_size(N, ratio)`, in rank order.
pub fn select_top(records: &[ScoreRecord], ratio: f64) -> Result<SelectionManifest> {
    check_ratio(ratio)?;
    if records.is_empty() {
        return Err(Error::param("cannot select from an empty ranking"));
    }
    check_ranking(records)?;
    let method = records[0].method;
    if records.iter().any(|r| r.method != method) {
        return Err(Error::param("score records mix several methods"));
    }
    let k = selection_size(records.len(), ratio);
    Ok(SelectionManifest {
        method,
        ratio,
        seed: None,
        selected: by_rank(records)
            .into_iter()
            .take(k)
            .map(|r| r.uid.clone())
            .collect(),
        fingerprint: String::new(),
        created_at: None,
    })
}

/// Uniform sample without replacement, returned in corpus order. Draws at
/// different ratios are independent, so random selections are not nested.
pub fn select_random(corpus: &Corpus, ratio: f64, seed: u64) -> Result<SelectionManifest> {
    check_ratio(ratio)?;
    if corpus.is_empty() {
        return Err(Error::param("cannot select from an empty corpus"));
    }
    let n = corpus.len();
    let k = selection_size(n, ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(SelectionManifest {
        method: Method::Random,
        ratio,
        seed: Some(seed),
        selected: picked
            .into_iter()
            .map(|i| corpus.instances[i].uid.clone())
            .collect(),
        fingerprint: String::new(),
        created_at: None,
    })
}

/// Every instance, corpus order.
pub fn select_full(corpus: &Corpus) -> SelectionManifest {
    SelectionManifest {
        method: Method::Full,
        ratio: 1.0,
        seed: None,
        selected: corpus.iter().map(|i| i.uid.clone()).collect(),
        fingerprint: String::new(),
        created_at: None,
    }
}

/// The selected instances, in manifest order.
pub fn materialize(manifest: &SelectionManifest, source: &Corpus) -> Result<Corpus> {
    let index = source.uid_index();
    let mut seen = HashSet::new();
    let instances = manifest
        .selected
        .iter()
        .map(|uid| {
            if !seen.insert(uid.as_str()) {
                return Err(Error::param(format!("uid {uid:?} selected twice")));
            }
            index
                .get(uid.as_str())
                .map(|&i| source.instances[i].clone())
                .ok_or_else(|| Error::UnknownUid(uid.clone()))
        })
        .collect::<Result<Vec<Instance>>>()?;
    Ok(Corpus::new(
        format!("{}:{}@{}", source.name, manifest.method, manifest.ratio),
        instances,
    ))
}
