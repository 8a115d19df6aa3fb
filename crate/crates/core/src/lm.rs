//! Order-n language model with additive (add-k) smoothing.
//!
//! Training pads each sequence with `n - 1` BOS markers and one EOS marker.
//! The predicted vocabulary is every training token plus EOS; one reserved
//! UNK outcome is added to every denominator, so for a context with total
//! count `c`:
//!
//! ```text
//! p(w | ctx) = (count(ctx, w) + k) / (c + k * (V + 1))
//! ```
//!
//! where `V` counts training tokens plus EOS. A context that never occurred in
//! training falls back to the unigram distribution, which is smoothed the same
//! way. There is no interpolation with intermediate orders.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::TokenSeq;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;
const FIRST_WORD_ID: u32 = 3;

#[derive(Clone, Debug, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

#[derive(Clone, Debug)]
pub struct NgramModel {
    order: usize,
    k: f64,
    ids: HashMap<String, u32>,
    words: Vec<String>,
    unigrams: Vec<u64>,
    unigram_total: u64,
    contexts: HashMap<Vec<u32>, ContextCounts>,
}

fn check_params(order: usize, k: f64) -> Result<()> {
    if order == 0 {
        return Err(Error::param("language model order must be at least 1"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::param(format!(
            "smoothing constant must be > 0, got {k}"
        )));
    }
    Ok(())
}

/// Trains an order-`order` model with add-`k` smoothing.
pub fn train_lm<'a>(
    corpus: impl IntoIterator<Item = &'a TokenSeq>,
    order: usize,
    k: f64,
) -> Result<NgramModel> {
    check_params(order, k)?;
    let mut model = NgramModel::empty(order, k);
    let mut n_seqs = 0usize;
    let mut encoded = Vec::new();
    for seq in corpus {
        n_seqs += 1;
        encoded.clear();
        encoded.extend(std::iter::repeat_n(BOS_ID, order - 1));
        for tok in seq.tokens() {
            let id = model.intern(tok);
            encoded.push(id);
        }
        encoded.push(EOS_ID);
        model.count(&encoded);
    }
    if n_seqs == 0 {
        return Err(Error::param(
            "cannot train a language model on an empty corpus",
        ));
    }
    Ok(model)
}

impl NgramModel {
    fn empty(order: usize, k: f64) -> Self {
        NgramModel {
            order,
            k,
            ids: HashMap::new(),
            words: Vec::new(),
            unigrams: vec![0; FIRST_WORD_ID as usize],
            unigram_total: 0,
            contexts: HashMap::new(),
        }
    }

    /// A model that knows `vocab` but has seen no counts, so every
    /// probability is pure smoothing: `1 / (V + 1)`.
    pub fn untrained<'a>(
        order: usize,
        k: f64,
        vocab: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        check_params(order, k)?;
        let mut model = NgramModel::empty(order, k);
        for tok in vocab {
            model.intern(tok);
        }
        Ok(model)
    }

    fn intern(&mut self, tok: &str) -> u32 {
        if let Some(&id) = self.ids.get(tok) {
            return id;
        }
        let id = FIRST_WORD_ID + self.words.len() as u32;
        self.ids.insert(tok.to_string(), id);
        self.words.push(tok.to_string());
        self.unigrams.push(0);
        id
    }

    fn count(&mut self, padded: &[u32]) {
        let h = self.order - 1;
        for i in h..padded.len() {
            let w = padded[i];
            self.unigrams[w as usize] += 1;
            self.unigram_total += 1;
            if h > 0 {
                let ctx = self.contexts.entry(padded[i - h..i].to_vec()).or_default();
                ctx.total += 1;
                *ctx.next.entry(w).or_insert(0) += 1;
            }
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Predicted vocabulary size: training tokens plus EOS (UNK excluded).
    pub fn vocab_size(&self) -> usize {
        self.words.len() + 1
    }

    /// Every outcome a context distributes mass over: training tokens, EOS
    /// and UNK.
    pub fn outcomes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.words.iter().map(String::as_str).collect();
        out.push(EOS);
        out.push(UNK);
        out
    }

    fn id(&self, tok: &str) -> u32 {
        match tok {
            EOS => EOS_ID,
            BOS => BOS_ID,
            _ => self.ids.get(tok).copied().unwrap_or(UNK_ID),
        }
    }

    fn denominator(&self, total: u64) -> f64 {
        total as f64 + self.k * (self.vocab_size() as f64 + 1.0)
    }

    fn prob_ids(&self, context: &[u32], w: u32) -> f64 {
        if self.order > 1 {
            if let Some(ctx) = self.contexts.get(context) {
                let c = ctx.next.get(&w).copied().unwrap_or(0);
                return (c as f64 + self.k) / self.denominator(ctx.total);
            }
        }
        let c = self.unigrams.get(w as usize).copied().unwrap_or(0);
        (c as f64 + self.k) / self.denominator(self.unigram_total)
    }

    /// `p(word | context)` where `context` holds the previous `order - 1`
    /// tokens (use [`BOS`] for padding). Unknown tokens map to UNK.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        assert_eq!(
            context.len(),
            self.order - 1,
            "context length must be order - 1"
        );
        let ctx: Vec<u32> = context.iter().map(|t| self.id(t)).collect();
        self.prob_ids(&ctx, self.id(word))
    }

    /// Smallest probability any outcome can receive in any context.
    pub fn min_probability(&self) -> f64 {
        let max_total = self
            .contexts
            .values()
            .map(|c| c.total)
            .chain(std::iter::once(self.unigram_total))
            .max()
            .unwrap_or(0);
        self.k / self.denominator(max_total)
    }

    /// Per-token cross-entropy in bits, `-(1/T) Σ log2 p(w_i | ctx_i)`, with
    /// `T = |seq| + 1` for the EOS prediction. The empty sequence scores EOS
    /// alone.
    pub fn cross_entropy(&self, seq: &TokenSeq) -> f64 {
        let h = self.order - 1;
        let mut padded: Vec<u32> = Vec::with_capacity(h + seq.len() + 1);
        padded.extend(std::iter::repeat_n(BOS_ID, h));
        padded.extend(seq.tokens().iter().map(|t| self.id(t)));
        padded.push(EOS_ID);
        let mut log_sum = 0.0;
        for i in h..padded.len() {
            log_sum += self.prob_ids(&padded[i - h..i], padded[i]).log2();
        }
        -log_sum / (seq.len() + 1) as f64
    }

    fn token(&self, id: u32) -> &str {
        match id {
            UNK_ID => UNK,
            BOS_ID => BOS,
            EOS_ID => EOS,
            _ => &self.words[(id - FIRST_WORD_ID) as usize],
        }
    }

    /// Snapshot with tokens spelled out and every map sorted, so equal models
    /// serialize to equal bytes regardless of training order.
    pub fn to_artifact(&self) -> LmArtifact {
        let mut vocab: Vec<String> = self.words.clone();
        vocab.sort();
        let unigrams = self
            .unigrams
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(id, &c)| (self.token(id as u32).to_string(), c))
            .collect();
        let mut contexts: Vec<ContextArtifact> = self
            .contexts
            .iter()
            .map(|(ctx, counts)| ContextArtifact {
                context: ctx.iter().map(|&id| self.token(id).to_string()).collect(),
                counts: counts
                    .next
                    .iter()
                    .map(|(&w, &c)| (self.token(w).to_string(), c))
                    .collect(),
            })
            .collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        LmArtifact {
            order: self.order,
            k: self.k,
            vocab,
            unigrams,
            contexts,
        }
    }

    pub fn from_artifact(art: &LmArtifact) -> Result<Self> {
        let mut model =
            NgramModel::untrained(art.order, art.k, art.vocab.iter().map(String::as_str))?;
        let id_of = |m: &NgramModel, t: &str| -> Result<u32> {
            match m.id(t) {
                UNK_ID if t != UNK => Err(Error::param(format!("token {t:?} not in vocabulary"))),
                id => Ok(id),
            }
        };
        for (tok, &c) in &art.unigrams {
            let id = id_of(&model, tok)?;
            model.unigrams[id as usize] += c;
            model.unigram_total += c;
        }
        for ctx in &art.contexts {
            if ctx.context.len() + 1 != art.order {
                return Err(Error::param("context length does not match model order"));
            }
            let key = ctx
                .context
                .iter()
                .map(|t| id_of(&model, t))
                .collect::<Result<Vec<_>>>()?;
            let mut counts = ContextCounts::default();
            for (tok, &c) in &ctx.counts {
                counts.total += c;
                counts.next.insert(id_of(&model, tok)?, c);
            }
            model.contexts.insert(key, counts);
        }
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextArtifact {
    pub context: Vec<String>,
    pub counts: BTreeMap<String, u64>,
}

/// JSON form of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmArtifact {
    pub order: usize,
    pub k: f64,
    pub vocab: Vec<String>,
    pub unigrams: BTreeMap<String, u64>,
    pub contexts: Vec<ContextArtifact>,
}
