//! Shared data model: items, cohorts, comparison records and graphs,
//! strength estimates and rankings.
//!
//! Everything here is immutable once built. Validation happens at
//! construction so downstream code can rely on the invariants.

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque item identifier. Ordering is lexicographic on the underlying string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ItemId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ItemId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Ground-truth score per item id. Used both as NDCG relevance and as the
/// source of comparison labels.
pub type ScoreMap = HashMap<ItemId, f64>;

/// One rankable unit, e.g. a recorded session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub subject_id: String,
    pub true_score: f64,
}

impl Item {
    pub fn new(id: impl Into<ItemId>, subject_id: impl Into<String>, true_score: f64) -> Self {
        Self {
            id: id.into(),
            subject_id: subject_id.into(),
            true_score,
        }
    }
}

/// An ordered collection of items with unique ids and finite scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    items: Vec<Item>,
    index: HashMap<ItemId, usize>,
}

impl Cohort {
    /// Builds a cohort, rejecting empty input, duplicate ids and non-finite scores.
    pub fn new(items: Vec<Item>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if !item.true_score.is_finite() {
                return Err(Error::NonFiniteScore {
                    id: item.id.clone(),
                    score: item.true_score,
                });
            }
            if index.insert(item.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(item.id.clone()));
            }
        }
        Ok(Self { items, index })
    }

    /// Sub-cohort keeping the items at `indices`, in the given order. May be empty.
    pub(crate) fn select(&self, indices: impl IntoIterator<Item = usize>) -> Self {
        let items: Vec<Item> = indices.into_iter().map(|i| self.items[i].clone()).collect();
        let index = items.iter().enumerate().map(|(i, item)| (item.id.clone(), i)).collect();
        Self { items, index }
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ItemId> {
        self.items.iter().map(|item| &item.id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.index_of(id).map(|i| &self.items[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn score(&self, id: &str) -> Option<f64> {
        self.get(id).map(|item| item.true_score)
    }

    pub fn scores(&self) -> ScoreMap {
        self.items
            .iter()
            .map(|item| (item.id.clone(), item.true_score))
            .collect()
    }

    /// Distinct subject ids, sorted.
    pub fn subjects(&self) -> Vec<&str> {
        let mut subjects: Vec<&str> = self
            .items
            .iter()
            .map(|item| item.subject_id.as_str())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        subjects.sort_unstable();
        subjects
    }
}

/// Re-checks every cohort invariant, returning the cohort unchanged.
pub fn validate_cohort(cohort: Cohort) -> Result<Cohort> {
    Cohort::new(cohort.items)
}

/// One judgment: `winner` was observed or predicted to rank above `loser`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub winner: ItemId,
    pub loser: ItemId,
}

impl ComparisonRecord {
    pub fn new(winner: impl Into<ItemId>, loser: impl Into<ItemId>) -> Self {
        Self {
            winner: winner.into(),
            loser: loser.into(),
        }
    }
}

/// Win counts between ordered item pairs over a fixed population.
///
/// Stored densely; `wins[i * n + j]` is the number of times item `i` beat item `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonGraph {
    item_ids: Vec<ItemId>,
    index: HashMap<ItemId, usize>,
    wins: Vec<u64>,
}

impl ComparisonGraph {
    /// Empty graph over the given ids.
    pub fn new(item_ids: Vec<ItemId>) -> Result<Self> {
        let mut index = HashMap::with_capacity(item_ids.len());
        for (i, id) in item_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let n = item_ids.len();
        Ok(Self {
            item_ids,
            index,
            wins: vec![0; n * n],
        })
    }

    pub fn item_ids(&self) -> &[ItemId] {
        &self.item_ids
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Adds `count` wins of `winner` over `loser`.
    pub fn add_wins(&mut self, winner: &str, loser: &str, count: u64) -> Result<()> {
        let w = self.index_of(winner).ok_or_else(|| Error::UnknownId(winner.into()))?;
        let l = self.index_of(loser).ok_or_else(|| Error::UnknownId(loser.into()))?;
        if w == l {
            return Err(Error::SelfPair(winner.into()));
        }
        let n = self.len();
        self.wins[w * n + l] += count;
        Ok(())
    }

    /// Wins of `winner` over `loser`; zero for unknown ids.
    pub fn wins(&self, winner: &str, loser: &str) -> u64 {
        match (self.index_of(winner), self.index_of(loser)) {
            (Some(w), Some(l)) => self.wins_at(w, l),
            _ => 0,
        }
    }

    pub fn wins_at(&self, winner: usize, loser: usize) -> u64 {
        self.wins[winner * self.len() + loser]
    }

    /// Total comparisons between `i` and `j` in either direction.
    pub fn comparisons_at(&self, i: usize, j: usize) -> u64 {
        self.wins_at(i, j) + self.wins_at(j, i)
    }

    pub fn total_comparisons(&self) -> u64 {
        self.wins.iter().sum()
    }

    /// Total wins per item, in `item_ids` order.
    pub fn win_totals(&self) -> Vec<u64> {
        let n = self.len();
        (0..n).map(|i| self.wins[i * n..(i + 1) * n].iter().sum()).collect()
    }
}

/// Log-strength per item, normalized to mean zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthVector {
    ids: Vec<ItemId>,
    values: Vec<f64>,
}

impl StrengthVector {
    /// Builds a vector from raw log-strengths, subtracting their mean.
    pub fn new(ids: Vec<ItemId>, mut values: Vec<f64>) -> Result<Self> {
        assert_eq!(ids.len(), values.len(), "ids and values differ in length");
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore {
                id: ids[i].clone(),
                score: values[i],
            });
        }
        if !values.is_empty() {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(Self { ids, values })
    }

    pub fn ids(&self) -> &[ItemId] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|x| x.as_str() == id).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, f64)> {
        self.ids.iter().zip(self.values.iter().copied())
    }

    pub fn to_map(&self) -> HashMap<ItemId, f64> {
        self.iter().map(|(id, v)| (id.clone(), v)).collect()
    }

    /// Ids sorted by descending strength; exact ties go to the smaller id.
    pub fn ranking(&self) -> Ranking {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[b]
                .total_cmp(&self.values[a])
                .then_with(|| self.ids[a].cmp(&self.ids[b]))
        });
        Ranking::new(order.into_iter().map(|i| self.ids[i].clone()).collect())
    }
}

impl Serialize for StrengthVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.len()))?;
        for (id, v) in self.iter() {
            map.serialize_entry(id, &v)?;
        }
        map.end()
    }
}

/// Item ids from most to least severe; position 1 is the head of the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking {
    ordered_ids: Vec<ItemId>,
}

impl Ranking {
    pub fn new(ordered_ids: Vec<ItemId>) -> Self {
        Self { ordered_ids }
    }

    pub fn ids(&self) -> &[ItemId] {
        &self.ordered_ids
    }

    pub fn len(&self) -> usize {
        self.ordered_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_ids.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.ordered_ids.iter().rev().cloned().collect())
    }

    /// 1-based position map.
    pub fn positions(&self) -> HashMap<&ItemId, usize> {
        self.ordered_ids.iter().enumerate().map(|(i, id)| (id, i + 1)).collect()
    }
}

/// Ranks every cohort item by strength. Fails if an item has no strength.
pub fn ranking_from_strengths(strengths: &StrengthVector, cohort: &Cohort) -> Result<Ranking> {
    if let Some(missing) = cohort.ids().find(|id| strengths.get(id.as_str()).is_none()) {
        return Err(Error::MissingStrength(missing.clone()));
    }
    let ids: Vec<ItemId> = cohort.ids().cloned().collect();
    let values = ids
        .iter()
        .map(|id| strengths.get(id.as_str()).unwrap_or_default())
        .collect();
    Ok(StrengthVector::new(ids, values)?.ranking())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(pairs: &[(&str, f64)]) -> StrengthVector {
        StrengthVector::new(
            pairs.iter().map(|(id, _)| ItemId::from(*id)).collect(),
            pairs.iter().map(|(_, v)| *v).collect(),
        )
        .unwrap()
    }

    fn ids(r: &Ranking) -> Vec<&str> {
        r.ids().iter().map(ItemId::as_str).collect()
    }

    #[test]
    fn clinical_score_range_is_valid() {
        let cohort = Cohort::new(vec![
            Item::new("a", "s1", 19.0),
            Item::new("b", "s2", 40.0),
            Item::new("c", "s2", 62.0),
        ])
        .unwrap();
        let validated = validate_cohort(cohort.clone()).unwrap();
        assert_eq!(validated, cohort);
        assert_eq!(validated.subjects(), vec!["s1", "s2"]);
    }

    #[test]
    fn duplicate_and_empty_and_nan_rejected() {
        let dup = Cohort::new(vec![Item::new("a", "s", 1.0), Item::new("a", "t", 2.0)]);
        assert!(matches!(dup, Err(Error::DuplicateId(id)) if id.as_str() == "a"));
        assert!(matches!(Cohort::new(vec![]), Err(Error::EmptyCohort)));
        let nan = Cohort::new(vec![Item::new("a", "s", f64::NAN)]);
        assert!(matches!(nan, Err(Error::NonFiniteScore { .. })));
        let inf = Cohort::new(vec![Item::new("a", "s", f64::INFINITY)]);
        assert!(matches!(inf, Err(Error::NonFiniteScore { .. })));
    }

    #[test]
    fn ranking_orders_and_breaks_ties_by_id() {
        assert_eq!(
            ids(&sv(&[("B", 0.0), ("C", -1.0), ("A", 1.0)]).ranking()),
            ["A", "B", "C"]
        );
        assert_eq!(ids(&sv(&[("B", 0.0), ("A", 0.0)]).ranking()), ["A", "B"]);
    }

    #[test]
    fn ranking_for_cohort_reports_missing_ids() {
        let cohort = Cohort::new(vec![Item::new("a", "s", 1.0), Item::new("b", "s", 2.0)]).unwrap();
        let s = sv(&[("a", 0.5)]);
        assert!(matches!(
            ranking_from_strengths(&s, &cohort),
            Err(Error::MissingStrength(id)) if id.as_str() == "b"
        ));
        let s = sv(&[("b", 0.5), ("a", -0.5), ("z", 3.0)]);
        assert_eq!(ids(&ranking_from_strengths(&s, &cohort).unwrap()), ["b", "a"]);
    }

    #[test]
    fn strength_vector_is_mean_zero() {
        let s = sv(&[("a", 3.0), ("b", 5.0), ("c", 10.0)]);
        let mean: f64 = s.values().iter().sum::<f64>() / 3.0;
        assert!(mean.abs() <= 1e-12);
        assert!(StrengthVector::new(vec!["a".into()], vec![f64::NAN]).is_err());
    }

    #[test]
    fn graph_counts() {
        let mut g = ComparisonGraph::new(vec!["a".into(), "b".into()]).unwrap();
        g.add_wins("a", "b", 2).unwrap();
        g.add_wins("b", "a", 1).unwrap();
        assert_eq!(g.wins("a", "b"), 2);
        assert_eq!(g.comparisons_at(0, 1), 3);
        assert_eq!(g.win_totals(), vec![2, 1]);
        assert!(matches!(g.add_wins("a", "a", 1), Err(Error::SelfPair(_))));
        assert!(matches!(g.add_wins("a", "q", 1), Err(Error::UnknownId(_))));
    }

    proptest! {
        #[test]
        fn ranking_is_a_permutation(values in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let ids: Vec<ItemId> = (0..values.len()).map(|i| ItemId::new(format!("i{i:03}"))).collect();
            let s = StrengthVector::new(ids.clone(), values).unwrap();
            let mut ranked = s.ranking().ids().to_vec();
            ranked.sort();
            prop_assert_eq!(ranked, ids);
        }

        #[test]
        fn ranking_invariant_under_monotone_transform(
            values in prop::collection::vec(-3.0f64..3.0, 1..40),
            scale in 0.1f64..4.0,
            shift in -10.0f64..10.0,
        ) {
            let ids: Vec<ItemId> = (0..values.len()).map(|i| ItemId::new(format!("i{i:03}"))).collect();
            let base = StrengthVector::new(ids.clone(), values.clone()).unwrap();
            // exp(scale*x)+shift is strictly increasing
            let transformed: Vec<f64> = values.iter().map(|v| (scale * v).exp() + shift).collect();
            let other = StrengthVector::new(ids, transformed).unwrap();
            prop_assert_eq!(base.ranking(), other.ranking());
        }
    }
}
