//! Tokenization and sparse text features.
//!
//! Everything downstream (language models, domain classifier, TF-IDF fallback
//! embeddings and the overlap metrics) shares one tokenizer: lowercase, split
//! on Unicode whitespace, strip non-alphanumeric characters from both ends of
//! each token, drop tokens that end up empty.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token inserted between premise and hypothesis when an instance is scored
/// as a single sequence. It can never be produced by [`tokenize`].
pub const SEP_TOKEN: &str = "⟨sep⟩";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const NGRAM_JOIN: u8 = 0x1f;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_extend(FNV_OFFSET, bytes)
}

fn fnv1a64_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Derives an independent seed for a named random stream, so each consumer of
/// randomness draws from its own generator.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    fnv1a64_extend(fnv1a64(&seed.to_le_bytes()), label.as_bytes())
}

/// FNV-1a over the tokens of an n-gram joined with the unit separator byte.
pub fn ngram_hash<S: AsRef<str>>(gram: &[S]) -> u64 {
    let mut hash = FNV_OFFSET;
    for (i, tok) in gram.iter().enumerate() {
        if i > 0 {
            hash = fnv1a64_extend(hash, &[NGRAM_JOIN]);
        }
        hash = fnv1a64_extend(hash, tok.as_ref().as_bytes());
    }
    hash
}

/// A token sequence produced by [`tokenize`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn unique(&self) -> BTreeSet<&str> {
        self.0.iter().map(String::as_str).collect()
    }

    /// Builds a sequence from tokens that are already canonical. Used for
    /// reserved markers such as [`SEP_TOKEN`]; tokens must be non-empty and
    /// whitespace-free.
    pub fn from_canonical(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        TokenSeq(tokens)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    let tokens = text
        .split_whitespace()
        .filter_map(|raw| {
            // Lowercase first: some case mappings emit combining marks that
            // must be trimmed too for the tokenizer to be idempotent.
            let lower = raw.to_lowercase();
            let tok = lower.trim_matches(|c: char| !c.is_alphanumeric());
            (!tok.is_empty()).then(|| tok.to_string())
        })
        .collect();
    TokenSeq(tokens)
}

/// Tokens of `premise ⟨sep⟩ hypothesis`: the text a whole NLI instance is
/// scored as.
pub fn pair_tokens(premise: &str, hypothesis: &str) -> TokenSeq {
    let mut tokens = tokenize(premise).0;
    tokens.push(SEP_TOKEN.to_string());
    tokens.extend(tokenize(hypothesis).0);
    TokenSeq(tokens)
}

/// All contiguous windows of length `n`, duplicates kept.
pub fn ngrams(seq: &TokenSeq, n: usize) -> Result<Vec<&[String]>> {
    if n == 0 {
        return Err(Error::param("n-gram order must be at least 1"));
    }
    Ok(seq.0.windows(n).collect())
}

/// Sparse vector with sorted, unique indices and no explicit zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVec {
    entries: Vec<(u32, f64)>,
    dim: usize,
}

impl FeatureVec {
    /// Builds a vector from unordered entries; repeated indices are summed and
    /// zeros dropped.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in entries {
            assert!((i as usize) < dim, "index {i} out of range for dim {dim}");
            *acc.entry(i).or_insert(0.0) += w;
        }
        let entries = acc.into_iter().filter(|&(_, w)| w != 0.0).collect();
        FeatureVec { entries, dim }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the empty vector stays empty.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for e in &mut self.entries {
                e.1 /= norm;
            }
        }
        self
    }

    /// Sparse dot product by merging the sorted index lists.
    pub fn dot(&self, other: &FeatureVec) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Places this vector at `offset` inside a larger space of dimension `dim`.
    pub fn shifted(&self, offset: u32, dim: usize) -> FeatureVec {
        let entries = self.entries.iter().map(|&(i, w)| (i + offset, w)).collect();
        let v = FeatureVec { entries, dim };
        debug_assert!(v.entries.iter().all(|&(i, _)| (i as usize) < dim));
        v
    }

    /// Concatenates blocks laid out back to back.
    pub fn concat(blocks: &[FeatureVec]) -> FeatureVec {
        let mut entries = Vec::new();
        let mut offset = 0usize;
        for b in blocks {
            entries.extend(b.entries.iter().map(|&(i, w)| (i + offset as u32, w)));
            offset += b.dim;
        }
        FeatureVec {
            entries,
            dim: offset,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i as usize] = w;
        }
        out
    }
}

/// Hashed n-gram feature settings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FeatureConfigRepr")]
pub struct FeatureConfig {
    orders: Vec<usize>,
    dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            orders: vec![1, 2],
            dim: 1 << 20,
        }
    }
}

#[derive(Deserialize)]
struct FeatureConfigRepr {
    orders: Vec<usize>,
    dim: usize,
}

impl TryFrom<FeatureConfigRepr> for FeatureConfig {
    type Error = Error;

    fn try_from(r: FeatureConfigRepr) -> Result<Self> {
        FeatureConfig::new(r.orders, r.dim)
    }
}

impl FeatureConfig {
    pub fn new(orders: impl IntoIterator<Item = usize>, dim: usize) -> Result<Self> {
        let orders: BTreeSet<usize> = orders.into_iter().collect();
        if orders.is_empty() || orders.contains(&0) {
            return Err(Error::param(
                "feature orders must be a non-empty set of n >= 1",
            ));
        }
        if !dim.is_power_of_two() || dim > (1usize << 31) {
            return Err(Error::param(format!(
                "feature dim must be a power of two no larger than 2^31, got {dim}"
            )));
        }
        Ok(FeatureConfig {
            orders: orders.into_iter().collect(),
            dim,
        })
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, hash: u64) -> u32 {
        (hash & (self.dim as u64 - 1)) as u32
    }
}

/// Each n-gram of each configured order adds 1 at its hashed index; the result
/// is L2-normalized.
pub fn hash_features(seq: &TokenSeq, config: &FeatureConfig) -> FeatureVec {
    let mut entries = Vec::new();
    for &n in &config.orders {
        entries.extend(
            seq.0
                .windows(n)
                .map(|gram| (config.index(ngram_hash(gram)), 1.0)),
        );
    }
    FeatureVec::from_entries(config.dim, entries).normalized()
}

/// Smoothed inverse document frequencies over unigrams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    n_docs: usize,
    doc_freq: HashMap<String, usize>,
}

impl IdfTable {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `ln((1 + N) / (1 + df)) + 1`; unseen tokens have `df = 0`.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.doc_freq.get(token).copied().unwrap_or(0);
        ((1.0 + self.n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    /// Token to idf, sorted by token.
    pub fn to_json(&self) -> serde_json::Value {
        let table: BTreeMap<&str, f64> = self
            .doc_freq
            .keys()
            .map(|t| (t.as_str(), self.idf(t)))
            .collect();
        serde_json::json!(table)
    }
}

pub fn tfidf_fit<'a>(docs: impl IntoIterator<Item = &'a TokenSeq>) -> Result<IdfTable> {
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    let mut n_docs = 0;
    for doc in docs {
        n_docs += 1;
        for tok in doc.unique() {
            *doc_freq.entry(tok.to_string()).or_insert(0) += 1;
        }
    }
    if n_docs == 0 {
        return Err(Error::param("cannot fit idf on an empty corpus"));
    }
    Ok(IdfTable { n_docs, doc_freq })
}

/// L2-normalized tf·idf over unigrams, tokens hashed into `dim` buckets with
/// the same hash as [`hash_features`].
pub fn tfidf_vec(seq: &TokenSeq, idf: &IdfTable, dim: usize) -> FeatureVec {
    assert!(dim.is_power_of_two(), "tf-idf dim must be a power of two");
    let mut tf: BTreeMap<&str, f64> = BTreeMap::new();
    for tok in &seq.0 {
        *tf.entry(tok.as_str()).or_insert(0.0) += 1.0;
    }
    let mask = dim as u64 - 1;
    let entries = tf.into_iter().map(|(tok, count)| {
        (
            (fnv1a64(tok.as_bytes()) & mask) as u32,
            count * idf.idf(tok),
        )
    });
    FeatureVec::from_entries(dim, entries).normalized()
}
