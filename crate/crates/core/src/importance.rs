//! Importance weighting through a target-vs-source domain classifier.
//!
//! A logistic regression separates target (label 1) from source (label 0)
//! instances. Its posterior `p = P(target | x)` is turned into a density-ratio
//! estimate
//!
//! ```text
//! w(x) = p / (1 - p) * (N_source / N_target)
//! ```
//!
//! The second factor corrects the posterior odds for unequal class sizes and
//! can be switched off. `p` is clamped to `[1e-6, 1 - 1e-6]` so weights stay
//! finite.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Instance};
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::par;
use crate::score::{ranked, Method, Orientation, ScoreRecord};
use crate::sgd::{train_logistic, Example, LogisticModel, SgdConfig, SparseWeights};
use crate::textproc::{hash_features, FeatureConfig, FeatureVec};

pub const POSTERIOR_EPS: f64 = 1e-6;

/// Where classifier features come from.
#[derive(Clone, Copy, Debug)]
pub enum Featurizer<'a> {
    /// Hashed n-grams of `premise ⟨sep⟩ hypothesis`.
    Hashed(&'a FeatureConfig),
    /// Externally computed vectors, looked up by uid.
    External(&'a EmbeddingStore),
}

/// Serializable identity of a [`Featurizer`], checked at inference time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    Hashed(FeatureConfig),
    External { dim: usize },
}

impl Featurizer<'_> {
    pub fn spec(&self) -> FeatureSpec {
        match self {
            Featurizer::Hashed(cfg) => FeatureSpec::Hashed((*cfg).clone()),
            Featurizer::External(store) => FeatureSpec::External { dim: store.dim() },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Featurizer::Hashed(cfg) => cfg.dim(),
            Featurizer::External(store) => store.dim(),
        }
    }

    pub fn features(&self, inst: &Instance) -> Result<FeatureVec> {
        match self {
            Featurizer::Hashed(cfg) => Ok(hash_features(&inst.tokens(), cfg)),
            Featurizer::External(store) => store
                .get(&inst.uid)
                .map(|e| e.to_feature_vec())
                .ok_or_else(|| Error::MissingUids(vec![inst.uid.clone()])),
        }
    }

    fn featurize(&self, corpus: &Corpus) -> Result<Vec<FeatureVec>> {
        if let Featurizer::External(store) = self {
            let missing = store.missing([corpus]);
            if !missing.is_empty() {
                return Err(Error::MissingUids(missing));
            }
        }
        par::map(&corpus.instances, |i| self.features(i))
            .into_iter()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainClassifier {
    model: LogisticModel,
    features: FeatureSpec,
    training: SgdConfig,
    n_source: usize,
    n_target: usize,
    prior_correction: bool,
}

/// Fits the domain classifier. Examples are laid out target first, then
/// source, before the per-epoch shuffle.
pub fn train_domain_classifier(
    source: &Corpus,
    target: &Corpus,
    featurizer: Featurizer<'_>,
    training: &SgdConfig,
) -> Result<DomainClassifier> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::param(
            "domain classifier needs non-empty source and target corpora",
        ));
    }
    let tgt = featurizer.featurize(target)?;
    let src = featurizer.featurize(source)?;
    let examples: Vec<Example> = tgt
        .iter()
        .map(|f| Example {
            features: f,
            target: 1.0,
            weight: 1.0,
        })
        .chain(src.iter().map(|f| Example {
            features: f,
            target: 0.0,
            weight: 1.0,
        }))
        .collect();
    let model = train_logistic(&examples, featurizer.dim(), training)?;
    Ok(DomainClassifier {
        model,
        features: featurizer.spec(),
        training: training.clone(),
        n_source: source.len(),
        n_target: target.len(),
        prior_correction: true,
    })
}

impl DomainClassifier {
    pub fn with_prior_correction(mut self, enabled: bool) -> Self {
        self.prior_correction = enabled;
        self
    }

    pub fn prior_correction(&self) -> bool {
        self.prior_correction
    }

    pub fn feature_spec(&self) -> &FeatureSpec {
        &self.features
    }

    pub fn model(&self) -> &LogisticModel {
        &self.model
    }

    /// `P(target | x)`, unclamped.
    pub fn posterior(&self, x: &FeatureVec) -> f64 {
        self.model.predict_proba(x)
    }

    /// `N_source / N_target` when prior correction is on, else 1.
    pub fn prior_factor(&self) -> f64 {
        if self.prior_correction {
            self.n_source as f64 / self.n_target as f64
        } else {
            1.0
        }
    }

    pub fn weight_for(&self, posterior: f64) -> f64 {
        let p = posterior.clamp(POSTERIOR_EPS, 1.0 - POSTERIOR_EPS);
        p / (1.0 - p) * self.prior_factor()
    }

    pub fn to_artifact(&self) -> ClassifierArtifact {
        ClassifierArtifact {
            features: self.features.clone(),
            training: self.training.clone(),
            n_source: self.n_source,
            n_target: self.n_target,
            prior_correction: self.prior_correction,
            weights: self.model.to_sparse(),
        }
    }

    pub fn from_artifact(art: &ClassifierArtifact) -> Result<Self> {
        Ok(DomainClassifier {
            model: LogisticModel::from_sparse(&art.weights)?,
            features: art.features.clone(),
            training: art.training.clone(),
            n_source: art.n_source,
            n_target: art.n_target,
            prior_correction: art.prior_correction,
        })
    }
}

/// JSON form of a trained classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub features: FeatureSpec,
    pub training: SgdConfig,
    pub n_source: usize,
    pub n_target: usize,
    pub prior_correction: bool,
    pub weights: SparseWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeight {
    pub uid: String,
    pub posterior: f64,
    pub weight: f64,
}

pub fn importance_weights(
    classifier: &DomainClassifier,
    source: &Corpus,
    featurizer: Featurizer<'_>,
) -> Result<Vec<ImportanceWeight>> {
    if featurizer.spec() != classifier.features {
        return Err(Error::FeatureMismatch(format!(
            "classifier trained with {:?}, scoring with {:?}",
            classifier.features,
            featurizer.spec()
        )));
    }
    let feats = featurizer.featurize(source)?;
    Ok(source
        .iter()
        .zip(feats)
        .map(|(inst, x)| {
            let posterior = classifier
                .posterior(&x)
                .clamp(POSTERIOR_EPS, 1.0 - POSTERIOR_EPS);
            ImportanceWeight {
                uid: inst.uid.clone(),
                posterior,
                weight: classifier.weight_for(posterior),
            }
        })
        .collect())
}

/// Ranks by weight, descending.
pub fn score_importance(weights: &[ImportanceWeight]) -> Vec<ScoreRecord> {
    ranked(
        weights.iter().map(|w| (w.uid.clone(), w.weight)),
        Method::Importance,
        Orientation::Desc,
    )
}

/// Uids with `weight >= tau`, input order kept.
pub fn threshold_filter(weights: &[ImportanceWeight], tau: f64) -> Result<Vec<String>> {
    // Also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(tau >= 0.0) {
        return Err(Error::param(format!("threshold must be >= 0, got {tau}")));
    }
    Ok(weights
        .iter()
        .filter(|w| w.weight >= tau)
        .map(|w| w.uid.clone())
        .collect())
}
