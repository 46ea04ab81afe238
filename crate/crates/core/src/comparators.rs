//! Pairwise outcome sources.
//!
//! A [`Comparator`] decides which of two items ranks higher. The oracle reads
//! ground truth; `bt_noisy` samples from the Bradley-Terry probability of the
//! scaled true scores; `flip` inverts the oracle with a fixed probability;
//! `logistic` is a trained [`LogisticPairModel`] over item features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{standardized_scores, FeatureCohort, LogisticPairModel, TrainingHyper};
use crate::model::{Cohort, ComparisonRecord, ItemId};

/// `e^s1 / (e^s1 + e^s2)`, evaluated as the logistic of `s1 - s2`.
pub fn bt_probability(s1: f64, s2: f64) -> Result<f64> {
    if !(s1.is_finite() && s2.is_finite()) {
        return Err(Error::NonFiniteStrength(s1, s2));
    }
    let d = s1 - s2;
    Ok(if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorKind {
    Oracle,
    BtNoisy,
    Flip,
    Logistic,
}

impl ComparatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::BtNoisy => "bt_noisy",
            Self::Flip => "flip",
            Self::Logistic => "logistic",
        }
    }
}

/// Which score the `bt_noisy` comparator feeds into the logistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    #[default]
    Raw,
    /// Zero mean, unit population variance over the cohort being compared.
    Standardized,
}

/// Synthetic feature settings for the logistic comparator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub dim: usize,
    pub noise_scale: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            dim: 8,
            noise_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorConfig {
    pub kind: ComparatorKind,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub score_scale: ScoreScale,
    #[serde(default)]
    pub features: FeatureSpec,
    #[serde(default)]
    pub training: TrainingHyper,
}

fn default_accuracy() -> f64 {
    1.0
}

impl ComparatorConfig {
    fn of_kind(kind: ComparatorKind) -> Self {
        Self {
            kind,
            beta: 0.0,
            accuracy: 1.0,
            seed: 0,
            score_scale: ScoreScale::Raw,
            features: FeatureSpec::default(),
            training: TrainingHyper::default(),
        }
    }

    pub fn oracle() -> Self {
        Self::of_kind(ComparatorKind::Oracle)
    }

    pub fn bt_noisy(beta: f64) -> Self {
        Self {
            beta,
            ..Self::of_kind(ComparatorKind::BtNoisy)
        }
    }

    pub fn flip(accuracy: f64) -> Self {
        Self {
            accuracy,
            ..Self::of_kind(ComparatorKind::Flip)
        }
    }

    pub fn logistic(features: FeatureSpec, training: TrainingHyper) -> Self {
        Self {
            features,
            training,
            ..Self::of_kind(ComparatorKind::Logistic)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scale(mut self, scale: ScoreScale) -> Self {
        self.score_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidComparator(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(0.5..=1.0).contains(&self.accuracy) {
            return Err(Error::InvalidComparator(format!(
                "accuracy must lie in [0.5, 1], got {}",
                self.accuracy
            )));
        }
        if self.kind == ComparatorKind::Logistic && self.features.dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(())
    }

    /// Short label without commas, suitable for a CSV cell.
    pub fn label(&self) -> String {
        match self.kind {
            ComparatorKind::Oracle => "oracle".to_owned(),
            ComparatorKind::BtNoisy => {
                let scale = match self.score_scale {
                    ScoreScale::Raw => "",
                    ScoreScale::Standardized => ";standardized",
                };
                format!("bt_noisy(beta={}{scale})", self.beta)
            }
            ComparatorKind::Flip => format!("flip(accuracy={})", self.accuracy),
            ComparatorKind::Logistic => {
                format!("logistic(d={};noise={})", self.features.dim, self.features.noise_scale)
            }
        }
    }
}

enum Engine<'a> {
    Oracle,
    BtNoisy {
        beta: f64,
        scores: Vec<f64>,
    },
    Flip {
        accuracy: f64,
    },
    Logistic {
        features: &'a FeatureCohort,
        model: &'a LogisticPairModel,
    },
}

/// A comparator bound to the cohort whose items it compares.
pub struct Comparator<'a> {
    cohort: &'a Cohort,
    engine: Engine<'a>,
}

impl<'a> Comparator<'a> {
    pub fn new(
        cfg: &ComparatorConfig,
        cohort: &'a Cohort,
        features: Option<&'a FeatureCohort>,
        model: Option<&'a LogisticPairModel>,
    ) -> Result<Self> {
        cfg.validate()?;
        let engine = match cfg.kind {
            ComparatorKind::Oracle => Engine::Oracle,
            ComparatorKind::BtNoisy => Engine::BtNoisy {
                beta: cfg.beta,
                scores: match cfg.score_scale {
                    ScoreScale::Raw => cohort.items().iter().map(|i| i.true_score).collect(),
                    ScoreScale::Standardized => standardized_scores(cohort),
                },
            },
            ComparatorKind::Flip => Engine::Flip { accuracy: cfg.accuracy },
            ComparatorKind::Logistic => {
                let features = features.ok_or(Error::MissingInput {
                    kind: "logistic",
                    what: "features",
                })?;
                let model = model.ok_or(Error::MissingInput {
                    kind: "logistic",
                    what: "a trained model",
                })?;
                Engine::Logistic { features, model }
            }
        };
        Ok(Self { cohort, engine })
    }

    fn lookup(&self, id: &str) -> Result<(usize, &'a ItemId)> {
        let idx = self.cohort.index_of(id).ok_or_else(|| Error::UnknownId(id.into()))?;
        Ok((idx, &self.cohort.items()[idx].id))
    }

    fn oracle(&self, i: usize, j: usize) -> Result<bool> {
        let items = self.cohort.items();
        let (a, b) = (&items[i], &items[j]);
        if a.true_score == b.true_score {
            return Err(Error::TiedPair(a.id.clone(), b.id.clone()));
        }
        Ok(a.true_score > b.true_score)
    }

    /// Predicts the winner of `(i, j)`, drawing from `rng` only for stochastic kinds.
    pub fn predict<R: Rng + ?Sized>(&self, i: &str, j: &str, rng: &mut R) -> Result<ComparisonRecord> {
        let (ii, id_i) = self.lookup(i)?;
        let (jj, id_j) = self.lookup(j)?;
        if ii == jj {
            return Err(Error::SelfPair(id_i.clone()));
        }
        let i_wins = match &self.engine {
            Engine::Oracle => self.oracle(ii, jj)?,
            Engine::BtNoisy { beta, scores } => {
                let p = bt_probability(beta * scores[ii], beta * scores[jj])?;
                rng.random::<f64>() < p
            }
            Engine::Flip { accuracy } => {
                let truth = self.oracle(ii, jj)?;
                if rng.random::<f64>() < *accuracy {
                    truth
                } else {
                    !truth
                }
            }
            Engine::Logistic { features, model } => model.winner(features, id_i, id_j)? == id_i,
        };
        Ok(if i_wins {
            ComparisonRecord::new(id_i.clone(), id_j.clone())
        } else {
            ComparisonRecord::new(id_j.clone(), id_i.clone())
        })
    }

    /// Predicts `(i, j)` and reconciles it with the `(j, i)` prediction.
    ///
    /// Agreeing orientations return that outcome. On disagreement the
    /// orientation with the smaller id on the left wins.
    pub fn predict_pair_consensus<R: Rng + ?Sized>(&self, i: &str, j: &str, rng: &mut R) -> Result<ComparisonRecord> {
        let forward = self.predict(i, j, rng)?;
        let backward = self.predict(j, i, rng)?;
        if forward == backward || i < j {
            Ok(forward)
        } else {
            Ok(backward)
        }
    }

    /// One prediction for every unordered pair, in canonical `(smaller id, larger id)` order.
    ///
    /// Pairs the oracle cannot order (equal true scores) under `oracle` or
    /// `flip` are settled by a fair coin from `rng`.
    pub fn round_robin<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<ComparisonRecord>> {
        let mut ids: Vec<&ItemId> = self.cohort.ids().collect();
        ids.sort();
        let mut records = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
        for (pos, a) in ids.iter().enumerate() {
            for b in &ids[pos + 1..] {
                let record = match self.predict(a.as_str(), b.as_str(), rng) {
                    Err(Error::TiedPair(..)) => {
                        if rng.random::<bool>() {
                            ComparisonRecord::new((*a).clone(), (*b).clone())
                        } else {
                            ComparisonRecord::new((*b).clone(), (*a).clone())
                        }
                    }
                    other => other?,
                };
                records.push(record);
            }
        }
        Ok(records)
    }
}

/// One-shot prediction for `(i, j)`.
pub fn predict_pair<R: Rng + ?Sized>(
    cfg: &ComparatorConfig,
    cohort: &Cohort,
    features: Option<&FeatureCohort>,
    model: Option<&LogisticPairModel>,
    i: &str,
    j: &str,
    rng: &mut R,
) -> Result<ComparisonRecord> {
    Comparator::new(cfg, cohort, features, model)?.predict(i, j, rng)
}
