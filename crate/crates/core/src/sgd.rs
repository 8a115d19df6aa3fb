//! Binary logistic regression trained by plain SGD on sparse features.
//!
//! Used by the domain classifier and by the proxy NLI model. Training is
//! single-threaded and fully determined by the data order and the seed: the
//! example order is reshuffled once per epoch from one ChaCha8 stream, the step
//! size decays as `lr / sqrt(t)` over the global step count `t`, and L2 decay
//! is applied every step through a lazily maintained scale factor so updates
//! stay proportional to the number of non-zero features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::FeatureVec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            epochs: 5,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2 * self.learning_rate < 1.0) {
            return Err(Error::param("l2 must be in [0, 1 / learning_rate)"));
        }
        Ok(())
    }
}

/// One training example: features, target in {0, 1}, gradient weight.
#[derive(Clone, Debug)]
pub struct Example<'a> {
    pub features: &'a FeatureVec,
    pub target: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    weights: Vec<f64>,
    bias: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn margin(&self, x: &FeatureVec) -> f64 {
        x.entries()
            .iter()
            .map(|&(i, v)| self.weights[i as usize] * v)
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_proba(&self, x: &FeatureVec) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn to_sparse(&self) -> SparseWeights {
        SparseWeights {
            dim: self.weights.len(),
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|&(_, &w)| w != 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
        }
    }

    pub fn from_sparse(s: &SparseWeights) -> Result<Self> {
        let mut weights = vec![0.0; s.dim];
        for &(i, w) in &s.weights {
            *weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::param(format!("weight index {i} outside dim {}", s.dim)))? =
                w;
        }
        Ok(LogisticModel {
            weights,
            bias: s.bias,
        })
    }
}

/// Serialized form: non-zero weights only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseWeights {
    pub dim: usize,
    pub bias: f64,
    pub weights: Vec<(u32, f64)>,
}

/// Fits a logistic regression. Examples with weight 0 are removed before
/// shuffling, so they leave the result bit-identical to training without them.
pub fn train_logistic(
    examples: &[Example<'_>],
    dim: usize,
    config: &SgdConfig,
) -> Result<LogisticModel> {
    config.validate()?;
    let active: Vec<&Example> = examples.iter().filter(|e| e.weight != 0.0).collect();
    if active.is_empty() {
        return Err(Error::param("no training examples with non-zero weight"));
    }
    for e in &active {
        if e.features.dim() != dim {
            return Err(Error::FeatureMismatch(format!(
                "example has dim {}, model expects {dim}",
                e.features.dim()
            )));
        }
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            return Err(Error::param(
                "example weights must be finite and non-negative",
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..active.len()).collect();
    let mut v = vec![0.0; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut step = 0u64;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let ex = active[idx];
            step += 1;
            let lr = config.learning_rate / (step as f64).sqrt();
            let dot: f64 = ex
                .features
                .entries()
                .iter()
                .map(|&(i, x)| v[i as usize] * x)
                .sum();
            let grad = (sigmoid(scale * dot + bias) - ex.target) * ex.weight;

            scale *= 1.0 - lr * config.l2;
            let g = lr * grad / scale;
            for &(i, x) in ex.features.entries() {
                v[i as usize] -= g * x;
            }
            bias -= lr * grad;

            if scale < 1e-9 {
                for w in &mut v {
                    *w *= scale;
                }
                scale = 1.0;
            }
        }
    }

    for w in &mut v {
        *w *= scale;
    }
    Ok(LogisticModel { weights: v, bias })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(dim: usize, idx: &[u32]) -> FeatureVec {
        FeatureVec::from_entries(dim, idx.iter().map(|&i| (i, 1.0))).normalized()
    }

    #[test]
    fn separates_two_indicator_features() {
        let pos = fv(8, &[1, 3]);
        let neg = fv(8, &[2, 3]);
        let mut ex = Vec::new();
        for _ in 0..50 {
            ex.push(Example {
                features: &pos,
                target: 1.0,
                weight: 1.0,
            });
            ex.push(Example {
                features: &neg,
                target: 0.0,
                weight: 1.0,
            });
        }
        let m = train_logistic(&ex, 8, &SgdConfig::default()).unwrap();
        assert!(m.predict_proba(&pos) > 0.5);
        assert!(m.predict_proba(&neg) < 0.5);
    }

    #[test]
    fn zero_weight_examples_are_no_ops() {
        let a = fv(8, &[1]);
        let b = fv(8, &[2]);
        let c = fv(8, &[5]);
        let base = vec![
            Example {
                features: &a,
                target: 1.0,
                weight: 1.0,
            },
            Example {
                features: &b,
                target: 0.0,
                weight: 1.0,
            },
        ];
        let mut padded = base.clone();
        padded.push(Example {
            features: &c,
            target: 1.0,
            weight: 0.0,
        });
        let cfg = SgdConfig {
            seed: 9,
            ..SgdConfig::default()
        };
        assert_eq!(
            train_logistic(&base, 8, &cfg).unwrap(),
            train_logistic(&padded, 8, &cfg).unwrap()
        );
    }

    #[test]
    fn sparse_round_trip_and_validation() {
        let a = fv(4, &[0, 1]);
        let ex = [Example {
            features: &a,
            target: 1.0,
            weight: 1.0,
        }];
        let m = train_logistic(&ex, 4, &SgdConfig::default()).unwrap();
        assert_eq!(LogisticModel::from_sparse(&m.to_sparse()).unwrap(), m);
        assert!(train_logistic(&ex, 8, &SgdConfig::default()).is_err());
        let bad = SgdConfig {
            epochs: 0,
            ..SgdConfig::default()
        };
        assert!(train_logistic(&ex, 4, &bad).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
