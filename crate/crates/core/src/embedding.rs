//! Embedding-similarity scoring.
//!
//! Vectors come from an external file (JSON Lines or the `XDSE` binary form)
//! or from the built-in TF-IDF fallback. Each source instance is scored by its
//! cosine similarity to the target instances, aggregated by max or by the mean
//! of the top k.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! "XDSE" | u32 count | u32 dim | count x ( u16 uid_len | uid bytes | dim x f32 )
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par;
use crate::score::{ranked, Method, Orientation, ScoreRecord};
use crate::textproc::{tfidf_fit, tfidf_vec, FeatureVec, TokenSeq};

pub const BINARY_MAGIC: &[u8; 4] = b"XDSE";

/// A unit-normalized vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Embedding {
    Dense(Vec<f64>),
    Sparse(FeatureVec),
}

impl Embedding {
    fn dot(&self, other: &Embedding) -> f64 {
        match (self, other) {
            (Embedding::Dense(a), Embedding::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Embedding::Sparse(a), Embedding::Sparse(b)) => a.dot(b),
            (Embedding::Dense(d), Embedding::Sparse(s))
            | (Embedding::Sparse(s), Embedding::Dense(d)) => {
                s.entries().iter().map(|&(i, w)| w * d[i as usize]).sum()
            }
        }
    }

    /// Sparse view, as used for classifier features.
    pub fn to_feature_vec(&self) -> FeatureVec {
        match self {
            Embedding::Dense(d) => {
                FeatureVec::from_entries(d.len(), d.iter().enumerate().map(|(i, &w)| (i as u32, w)))
            }
            Embedding::Sparse(s) => s.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreOrigin {
    External,
    TfidfFallback,
}

#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    dim: usize,
    origin: StoreOrigin,
    vectors: HashMap<String, Embedding>,
}

fn unit_dense(uid: &str, values: Vec<f64>) -> Result<Embedding> {
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector(uid.to_string()));
    }
    if !norm.is_finite() {
        return Err(Error::param(format!("non-finite vector for {uid:?}")));
    }
    Ok(Embedding::Dense(
        values.into_iter().map(|x| x / norm).collect(),
    ))
}

impl EmbeddingStore {
    /// Validates and normalizes dense vectors. All must share one dimension
    /// and be non-zero.
    pub fn from_dense(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (uid, values) in entries {
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected {
                return Err(Error::DimensionMismatch {
                    uid,
                    expected,
                    found: values.len(),
                });
            }
            let emb = unit_dense(&uid, values)?;
            if vectors.insert(uid.clone(), emb).is_some() {
                return Err(Error::param(format!("duplicate uid {uid:?} in embeddings")));
            }
        }
        Ok(EmbeddingStore {
            dim: dim.unwrap_or(0),
            origin: StoreOrigin::External,
            vectors,
        })
    }

    /// TF-IDF vectors of `premise ⟨sep⟩ hypothesis`, idf fitted on both
    /// corpora. A uid present in both corpora must carry the same text.
    pub fn tfidf_fallback(source: &Corpus, target: &Corpus, dim: usize) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(Error::param("tf-idf dim must be a power of two"));
        }
        let mut docs: Vec<(&str, TokenSeq)> = Vec::new();
        let mut seen: HashMap<&str, (&str, &str)> = HashMap::new();
        for inst in source.iter().chain(target.iter()) {
            match seen.get(inst.uid.as_str()) {
                Some(&(p, h)) if p == inst.premise && h == inst.hypothesis => continue,
                Some(_) => {
                    return Err(Error::param(format!(
                        "uid {:?} names different texts in source and target",
                        inst.uid
                    )))
                }
                None => {
                    seen.insert(&inst.uid, (&inst.premise, &inst.hypothesis));
                    docs.push((&inst.uid, inst.tokens()));
                }
            }
        }
        let idf = tfidf_fit(docs.iter().map(|(_, t)| t))?;
        let vecs = par::map(&docs, |(_, toks)| tfidf_vec(toks, &idf, dim));
        let mut vectors = HashMap::with_capacity(docs.len());
        for ((uid, _), v) in docs.iter().zip(vecs) {
            if v.is_empty() {
                return Err(Error::ZeroVector(uid.to_string()));
            }
            vectors.insert(uid.to_string(), Embedding::Sparse(v));
        }
        Ok(EmbeddingStore {
            dim,
            origin: StoreOrigin::TfidfFallback,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> StoreOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, uid: &str) -> Option<&Embedding> {
        self.vectors.get(uid)
    }

    /// Uids of `corpora` with no vector, in corpus order.
    pub fn missing<'a>(&self, corpora: impl IntoIterator<Item = &'a Corpus>) -> Vec<String> {
        corpora
            .into_iter()
            .flat_map(|c| c.iter())
            .filter(|i| !self.vectors.contains_key(&i.uid))
            .map(|i| i.uid.clone())
            .collect()
    }

    fn require(&self, corpora: &[&Corpus]) -> Result<()> {
        let missing = self.missing(corpora.iter().copied());
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingUids(missing))
        }
    }
}

pub fn read_embeddings_jsonl<R: BufRead>(reader: R) -> Result<EmbeddingStore> {
    let mut entries = Vec::new();
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
        let vector = value
            .get("vector")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(line_no, "missing array field vector"))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| Error::parse(line_no, "vector entry is not numeric"))
            })
            .collect::<Result<Vec<f64>>>()?;
        entries.push((uid.to_string(), vector));
    }
    EmbeddingStore::from_dense(entries)
}

pub fn read_embeddings_binary<R: Read>(mut reader: R) -> Result<EmbeddingStore> {
    let mut header = [0u8; 12];
    reader.read_exact(&mut header)?;
    if &header[..4] != BINARY_MAGIC {
        return Err(Error::param("not an XDSE embeddings file"));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut entries = Vec::with_capacity(count);
    let mut buf = vec![0u8; dim * 4];
    for _ in 0..count {
        let mut len = [0u8; 2];
        reader.read_exact(&mut len)?;
        let mut uid = vec![0u8; u16::from_le_bytes(len) as usize];
        reader.read_exact(&mut uid)?;
        let uid = String::from_utf8(uid).map_err(|_| Error::param("uid is not valid UTF-8"))?;
        reader.read_exact(&mut buf)?;
        let vector = buf
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        entries.push((uid, vector));
    }
    EmbeddingStore::from_dense(entries)
}

/// Writes dense vectors in the binary layout, in the given order.
pub fn write_embeddings_binary<W: Write>(
    entries: &[(String, Vec<f32>)],
    mut writer: W,
) -> Result<()> {
    let dim = entries.first().map_or(0, |e| e.1.len());
    writer.write_all(BINARY_MAGIC)?;
    writer.write_all(&(entries.len() as u32).to_le_bytes())?;
    writer.write_all(&(dim as u32).to_le_bytes())?;
    for (uid, v) in entries {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                uid: uid.clone(),
                expected: dim,
                found: v.len(),
            });
        }
        let len =
            u16::try_from(uid.len()).map_err(|_| Error::param("uid longer than 65535 bytes"))?;
        writer.write_all(&len.to_le_bytes())?;
        writer.write_all(uid.as_bytes())?;
        for x in v {
            writer.write_all(&x.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Loads either format, sniffing the magic bytes.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut reader = BufReader::new(file);
    let is_binary = reader.fill_buf()?.starts_with(BINARY_MAGIC);
    if is_binary {
        read_embeddings_binary(reader)
    } else {
        read_embeddings_jsonl(reader)
    }
}

pub fn save_embeddings_binary(
    entries: &[(String, Vec<f32>)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_embeddings_binary(entries, BufWriter::new(file))
}

/// Cosine similarity of two dense vectors, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            uid: String::new(),
            expected: u.len(),
            found: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector(String::new()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum Aggregator {
    /// Similarity to the nearest target instance.
    #[default]
    Max,
    /// Mean similarity to the `k` nearest target instances (`k` is capped at
    /// the target size).
    MeanTopK(usize),
}

fn aggregate(sims: &mut [f64], aggregator: Aggregator) -> f64 {
    match aggregator {
        Aggregator::Max => sims.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregator::MeanTopK(k) => {
            let k = k.clamp(1, sims.len());
            sims.sort_unstable_by(|a, b| b.total_cmp(a));
            sims[..k].iter().sum::<f64>() / k as f64
        }
    }
}

/// Scores each source instance by aggregated cosine similarity to the target
/// instances, ranked descending with uid tie-break. Records keep input order.
pub fn score_embedding(
    source: &Corpus,
    target: &Corpus,
    store: &EmbeddingStore,
    aggregator: Aggregator,
) -> Result<Vec<ScoreRecord>> {
    if target.is_empty() {
        return Err(Error::param(
            "embedding scoring needs a non-empty target corpus",
        ));
    }
    if let Aggregator::MeanTopK(0) = aggregator {
        return Err(Error::param("mean_top_k needs k >= 1"));
    }
    store.require(&[source, target])?;
    let targets: Vec<&Embedding> = target.iter().map(|t| &store.vectors[&t.uid]).collect();
    let scores = par::map(&source.instances, |inst| {
        let e = &store.vectors[&inst.uid];
        let mut sims: Vec<f64> = targets.iter().map(|t| e.dot(t).clamp(-1.0, 1.0)).collect();
        aggregate(&mut sims, aggregator)
    });
    Ok(ranked(
        source.iter().map(|i| i.uid.clone()).zip(scores),
        Method::Embedding,
        Orientation::Desc,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]` of the scores. Bins are
/// left-closed, the last one also right-closed. When every score is equal all
/// records land in the first bin.
pub fn score_histogram(records: &[ScoreRecord], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::param("histogram needs at least one bin"));
    }
    let finite: Vec<f64> = records
        .iter()
        .map(|r| r.score)
        .filter(|s| s.is_finite())
        .collect();
    if finite.is_empty() {
        return Ok(Vec::new());
    }
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for s in finite {
        let idx = if width > 0.0 {
            (((s - min) / width).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: min + width * i as f64,
            count,
        })
        .collect())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut writer: W) -> Result<()> {
    writeln!(writer, "bin_lower,count")?;
    for b in bins {
        writeln!(writer, "{},{}", b.lower, b.count)?;
    }
    writer.flush()?;
    Ok(())
}
