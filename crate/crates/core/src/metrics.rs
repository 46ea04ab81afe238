//! Ranking quality against ground truth.
//!
//! Relevance for DCG is the raw ground-truth score, with discount
//! `1 / log2(position + 1)`. Spearman's rho is the Pearson correlation
//! between predicted positions and average-rank ground truth. Tertile
//! misses count true top-third items the prediction leaves out of its top third.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ItemId, Ranking, ScoreMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub spearman_rho: f64,
    pub ndcg: f64,
    pub tertile_misses: usize,
    pub n_items: usize,
}

/// Scores every metric for `predicted` against `true_scores`.
pub fn evaluate(predicted: &Ranking, true_scores: &ScoreMap) -> Result<MetricReport> {
    Ok(MetricReport {
        spearman_rho: spearman(predicted, true_scores)?,
        ndcg: ndcg(predicted, true_scores)?,
        tertile_misses: tertile_misses(predicted, true_scores)?,
        n_items: predicted.len(),
    })
}

fn lookup(scores: &ScoreMap, id: &ItemId) -> Result<f64> {
    scores.get(id).copied().ok_or_else(|| Error::UnknownId(id.clone()))
}

fn relevances_in_order(predicted: &Ranking, relevance: &ScoreMap) -> Result<Vec<f64>> {
    predicted
        .ids()
        .iter()
        .map(|id| {
            let r = lookup(relevance, id)?;
            if r < 0.0 {
                return Err(Error::NegativeRelevance {
                    id: id.clone(),
                    value: r,
                });
            }
            Ok(r)
        })
        .collect()
}

fn discounted_sum(gains: impl IntoIterator<Item = f64>) -> f64 {
    gains
        .into_iter()
        .enumerate()
        .map(|(i, rel)| rel / ((i + 2) as f64).log2())
        .sum()
}

pub fn dcg(predicted: &Ranking, relevance: &ScoreMap) -> Result<f64> {
    Ok(discounted_sum(relevances_in_order(predicted, relevance)?))
}

pub fn idcg(relevance: &ScoreMap) -> Result<f64> {
    if relevance.is_empty() {
        return Err(Error::EmptyRelevance);
    }
    if let Some((id, &value)) = relevance.iter().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeRelevance { id: id.clone(), value });
    }
    let mut sorted: Vec<f64> = relevance.values().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(discounted_sum(sorted))
}

/// `dcg / idcg`, where the ideal uses the relevances of the ranked items only.
pub fn ndcg(predicted: &Ranking, relevance: &ScoreMap) -> Result<f64> {
    let gains = relevances_in_order(predicted, relevance)?;
    if gains.is_empty() {
        return Err(Error::EmptyRelevance);
    }
    let actual = discounted_sum(gains.iter().copied());
    let mut ideal_order = gains;
    ideal_order.sort_by(|a, b| b.total_cmp(a));
    let ideal = discounted_sum(ideal_order);
    if ideal == 0.0 {
        return Err(Error::ZeroIdcg);
    }
    Ok((actual / ideal).min(1.0))
}

/// 1-based average ranks of `values` in descending order; ties share the mean rank.
pub fn average_ranks_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mean;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    // sqrt of the product keeps identical inputs at exactly 1
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Tie-corrected Spearman rho between the predicted order and ground truth.
pub fn spearman(predicted: &Ranking, true_scores: &ScoreMap) -> Result<f64> {
    let n = predicted.len();
    if n < 2 {
        return Err(Error::TooFewItems { needed: 2, found: n });
    }
    let scores: Vec<f64> = predicted
        .ids()
        .iter()
        .map(|id| lookup(true_scores, id))
        .collect::<Result<_>>()?;
    let truth = average_ranks_descending(&scores);
    let positions: Vec<f64> = (1..=n).map(|p| p as f64).collect();
    pearson(&positions, &truth).ok_or(Error::ZeroVariance)
}

/// Items in the true top `floor(n/3)` missing from the predicted top `floor(n/3)`.
///
/// Equal scores at the true boundary are resolved toward the smaller id.
pub fn tertile_misses(predicted: &Ranking, true_scores: &ScoreMap) -> Result<usize> {
    let n = predicted.len();
    if n < 3 {
        return Err(Error::TooFewItems { needed: 3, found: n });
    }
    let k = n / 3;
    let mut by_truth: Vec<(&ItemId, f64)> = predicted
        .ids()
        .iter()
        .map(|id| lookup(true_scores, id).map(|s| (id, s)))
        .collect::<Result<_>>()?;
    by_truth.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let predicted_top = &predicted.ids()[..k];
    Ok(by_truth[..k]
        .iter()
        .filter(|(id, _)| !predicted_top.contains(id))
        .count())
}
