//! One entry point over all scorers, shared by the CLI and the sweep runner.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{score_embedding, Aggregator, EmbeddingStore};
use crate::error::{Error, Result};
use crate::importance::{
    importance_weights, score_importance, train_domain_classifier, Featurizer, ImportanceWeight,
};
use crate::moore_lewis::{score_external_map, score_moore_lewis, train_domain_lms};
use crate::score::{ranked, Method, Orientation, ScoreRecord};
use crate::sgd::SgdConfig;
use crate::textproc::{derive_seed, FeatureConfig};

/// Settings of every scorer. Seeds are not stored here; they are derived
/// from the run seed at call time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub lm_order: usize,
    pub lm_k: f64,
    pub features: FeatureConfig,
    pub classifier: ClassifierSettings,
    /// Bucket count of the TF-IDF fallback vectors.
    pub embedding_dim: usize,
    pub aggregator: Aggregator,
    /// Train the domain classifier on the supplied embeddings instead of
    /// hashed n-grams.
    pub importance_on_embeddings: bool,
    /// Orientation of externally supplied scores.
    pub external_orientation: Orientation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub prior_correction: bool,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        let sgd = SgdConfig::default();
        ClassifierSettings {
            epochs: sgd.epochs,
            learning_rate: sgd.learning_rate,
            l2: sgd.l2,
            prior_correction: true,
        }
    }
}

impl ClassifierSettings {
    pub fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            l2: self.l2,
            seed,
        }
    }
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            lm_order: 3,
            lm_k: 0.5,
            features: FeatureConfig::default(),
            classifier: ClassifierSettings::default(),
            embedding_dim: 1 << 20,
            aggregator: Aggregator::Max,
            importance_on_embeddings: false,
            external_orientation: Orientation::Desc,
        }
    }
}

/// Precomputed inputs some scorers need.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScoreInputs<'a> {
    pub embeddings: Option<&'a EmbeddingStore>,
    pub external: Option<&'a HashMap<String, f64>>,
}

/// Output of [`score_source`]; importance scoring also returns its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub records: Vec<ScoreRecord>,
    pub weights: Option<Vec<ImportanceWeight>>,
}

/// Scores `source` against `target` with `method`. Records keep source order.
/// Random scores are uniform draws, so taking their top ranks is a uniform
/// sample.
pub fn score_source(
    method: Method,
    source: &Corpus,
    target: &Corpus,
    config: &ScorerConfig,
    inputs: ScoreInputs<'_>,
    seed: u64,
) -> Result<Scored> {
    if source.is_empty() {
        return Err(Error::param("source corpus is empty"));
    }
    let plain = |records| Scored {
        records,
        weights: None,
    };
    match method {
        Method::MooreLewis => {
            let (lt, ls) = train_domain_lms(source, target, config.lm_order, config.lm_k)?;
            Ok(plain(score_moore_lewis(source, &lt, &ls)))
        }
        Method::Importance => {
            let featurizer = if config.importance_on_embeddings {
                Featurizer::External(inputs.embeddings.ok_or_else(|| {
                    Error::param("importance on embeddings needs an embeddings file")
                })?)
            } else {
                Featurizer::Hashed(&config.features)
            };
            let sgd = config.classifier.sgd(derive_seed(seed, "importance"));
            let clf = train_domain_classifier(source, target, featurizer, &sgd)?
                .with_prior_correction(config.classifier.prior_correction);
            let weights = importance_weights(&clf, source, featurizer)?;
            Ok(Scored {
                records: score_importance(&weights),
                weights: Some(weights),
            })
        }
        Method::Embedding => {
            let fallback;
            let store = match inputs.embeddings {
                Some(s) => s,
                None => {
                    fallback =
                        EmbeddingStore::tfidf_fallback(source, target, config.embedding_dim)?;
                    &fallback
                }
            };
            Ok(plain(score_embedding(
                source,
                target,
                store,
                config.aggregator,
            )?))
        }
        Method::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "random"));
            let scores: Vec<(String, f64)> = source
                .iter()
                .map(|i| (i.uid.clone(), rng.gen::<f64>()))
                .collect();
            Ok(plain(ranked(scores, Method::Random, Orientation::Desc)))
        }
        Method::External => {
            let map = inputs
                .external
                .ok_or_else(|| Error::param("external method needs a scores file"))?;
            Ok(plain(score_external_map(
                source,
                map,
                config.external_orientation,
            )?))
        }
        Method::Full => Err(Error::param("full augmentation does not score instances")),
    }
}
