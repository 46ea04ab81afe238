//! Synthetic item features and a trainable logistic pairwise comparator.
//!
//! The comparator scores a pair by `w · (x_first - x_second)`. Because only
//! the feature difference enters, swapping the two items negates the score,
//! so predictions are antisymmetric without any extra reconciliation.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cohort, ItemId};
use crate::pairs::LabeledPair;
use crate::rng::StreamRng;

/// Fixed-dimension feature vector per item.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCohort {
    ids: Vec<ItemId>,
    index: HashMap<ItemId, usize>,
    vectors: Vec<Vec<f64>>,
    direction: Vec<f64>,
    noise_scale: f64,
    seed: u64,
}

impl FeatureCohort {
    /// Wraps externally supplied vectors. `direction` is recorded as given.
    pub fn from_vectors(ids: Vec<ItemId>, vectors: Vec<Vec<f64>>, direction: Vec<f64>) -> Result<Self> {
        let dim = direction.len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            ids,
            index,
            vectors,
            direction,
            noise_scale: 0.0,
            seed: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn ids(&self) -> &[ItemId] {
        &self.ids
    }

    /// Unit signal direction.
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    fn require(&self, id: &ItemId) -> Result<&[f64]> {
        self.get(id.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))
    }
}

/// Scores standardized to zero mean and unit population variance.
/// A constant cohort maps to all zeros.
pub fn standardized_scores(cohort: &Cohort) -> Vec<f64> {
    let n = cohort.len() as f64;
    let scores: Vec<f64> = cohort.items().iter().map(|i| i.true_score).collect();
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|s| (s - mean) / sd).collect()
}

/// `x_i = z_i * u + noise_scale * eps_i`, with `z` the standardized score,
/// `u` a random unit vector and `eps_i` standard normal per coordinate.
///
/// Noise is drawn even when `noise_scale` is zero, so two cohorts generated
/// from the same seed share their noise realization up to scale.
pub fn generate_features(cohort: &Cohort, dim: usize, noise_scale: f64, seed: u64) -> Result<FeatureCohort> {
    if dim < 1 {
        return Err(Error::ZeroDimension);
    }
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err(Error::InvalidComparator(format!(
            "noise_scale must be finite and >= 0, got {noise_scale}"
        )));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    let direction = loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let z = standardized_scores(cohort);
    let vectors = z
        .iter()
        .map(|&zi| {
            direction
                .iter()
                .map(|&u| {
                    let eps: f64 = rng.sample(StandardNormal);
                    zi * u + noise_scale * eps
                })
                .collect()
        })
        .collect();
    let mut features = FeatureCohort::from_vectors(cohort.ids().cloned().collect(), vectors, direction)?;
    features.noise_scale = noise_scale;
    features.seed = seed;
    Ok(features)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mini-batch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Shuffles mini-batches; unused in full-batch mode.
    pub seed: u64,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticPairModel {
    pub weights: Vec<f64>,
    /// Always zero: the pair score uses the feature difference only.
    pub bias: f64,
    pub hyperparameters: TrainingHyper,
    pub final_loss: f64,
}

impl LogisticPairModel {
    pub fn zeros(dim: usize, hyperparameters: TrainingHyper) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            hyperparameters,
            final_loss: std::f64::consts::LN_2,
        }
    }

    /// `w · (x_i - x_j)`; positive favours `i`.
    pub fn pair_score(&self, xi: &[f64], xj: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(xi.iter().zip(xj))
            .map(|(w, (a, b))| w * (a - b))
            .sum()
    }

    /// Predicted winner of `(i, j)`; a zero score goes to the smaller id.
    pub fn winner<'a>(&self, features: &FeatureCohort, i: &'a ItemId, j: &'a ItemId) -> Result<&'a ItemId> {
        if features.dim() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: features.dim(),
            });
        }
        let score = self.pair_score(features.require(i)?, features.require(j)?);
        Ok(if score > 0.0 {
            i
        } else if score < 0.0 {
            j
        } else {
            i.min(j)
        })
    }

    /// Fraction of pairs whose label the model reproduces.
    pub fn accuracy(&self, pairs: &[LabeledPair], features: &FeatureCohort) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut correct = 0usize;
        for p in pairs {
            let first_wins = self.winner(features, &p.first, &p.second)? == &p.first;
            correct += usize::from(first_wins == p.label);
        }
        Ok(correct as f64 / pairs.len() as f64)
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean pairwise cross-entropy, precomputed over feature differences.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    diffs: Vec<Vec<f64>>,
    labels: Vec<f64>,
    dim: usize,
}

impl LogisticObjective {
    pub fn new(pairs: &[LabeledPair], features: &FeatureCohort) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut diffs = Vec::with_capacity(pairs.len());
        let mut labels = Vec::with_capacity(pairs.len());
        for p in pairs {
            let a = features.require(&p.first)?;
            let b = features.require(&p.second)?;
            diffs.push(a.iter().zip(b).map(|(x, y)| x - y).collect());
            labels.push(if p.label { 1.0 } else { 0.0 });
        }
        Ok(Self {
            diffs,
            labels,
            dim: features.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: weights.len(),
            });
        }
        Ok(())
    }

    fn margin(weights: &[f64], diff: &[f64]) -> f64 {
        weights.iter().zip(diff).map(|(w, d)| w * d).sum()
    }

    pub fn loss(&self, weights: &[f64]) -> Result<f64> {
        self.check(weights)?;
        let total: f64 = self
            .diffs
            .iter()
            .zip(&self.labels)
            .map(|(d, &y)| {
                let t = Self::margin(weights, d);
                softplus(t) - y * t
            })
            .sum();
        Ok(total / self.labels.len() as f64)
    }

    pub fn gradient(&self, weights: &[f64]) -> Result<Vec<f64>> {
        self.check(weights)?;
        Ok(self.batch_gradient(weights, 0..self.labels.len()))
    }

    fn batch_gradient(&self, weights: &[f64], rows: impl IntoIterator<Item = usize>) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim];
        let mut count = 0usize;
        for r in rows {
            let d = &self.diffs[r];
            let residual = sigmoid(Self::margin(weights, d)) - self.labels[r];
            grad.iter_mut().zip(d).for_each(|(g, x)| *g += residual * x);
            count += 1;
        }
        grad.iter_mut().for_each(|g| *g /= count as f64);
        grad
    }
}

/// Gradient descent on the mean pairwise cross-entropy, from all-zero weights.
pub fn fit_logistic(
    pairs: &[LabeledPair],
    features: &FeatureCohort,
    hyper: &TrainingHyper,
) -> Result<LogisticPairModel> {
    let objective = LogisticObjective::new(pairs, features)?;
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0) {
        return Err(Error::InvalidComparator(format!(
            "learning_rate must be positive, got {}",
            hyper.learning_rate
        )));
    }
    let mut model = LogisticPairModel::zeros(features.dim(), hyper.clone());
    let n = pairs.len();
    let batch = hyper.batch_size.unwrap_or(n).clamp(1, n);
    let mut rng = StreamRng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..hyper.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let grad = objective.batch_gradient(&model.weights, chunk.iter().copied());
            model
                .weights
                .iter_mut()
                .zip(&grad)
                .for_each(|(w, g)| *w -= hyper.learning_rate * g);
        }
    }
    model.final_loss = objective.loss(&model.weights)?;
    debug_assert!(model.weights.iter().all(|w| w.is_finite()));
    Ok(model)
}
