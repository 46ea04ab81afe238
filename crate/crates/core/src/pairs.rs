//! Labeled training pairs built from ground-truth scores.
//!
//! Pairs whose two items carry the same score are never emitted. Each of
//! those items still appears in pairs against every differently-scored item.

use serde::{Deserialize, Serialize};

use crate::model::{Cohort, ItemId};

/// `label` is true iff `first` has the strictly higher ground-truth score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub first: ItemId,
    pub second: ItemId,
    #[serde(with = "label_int")]
    pub label: bool,
}

mod label_int {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(label: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*label))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOrdering {
    /// Each unordered pair once, `first` being the smaller id.
    #[default]
    UnorderedOnce,
    /// Each unordered pair in both orientations.
    BothOrders,
}

impl std::str::FromStr for PairOrdering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unordered_once" => Ok(Self::UnorderedOnce),
            "both_orders" => Ok(Self::BothOrders),
            other => Err(format!(
                "unknown pair ordering `{other}` (expected unordered_once or both_orders)"
            )),
        }
    }
}

/// Indices of the cohort's items sorted by id.
fn sorted_indices(cohort: &Cohort) -> Vec<usize> {
    let items = cohort.items();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].id.cmp(&items[b].id));
    order
}

/// All non-tied pairs, sorted by `(first, second)`.
pub fn generate_pairs(cohort: &Cohort, ordering: PairOrdering) -> Vec<LabeledPair> {
    let items = cohort.items();
    let order = sorted_indices(cohort);
    let mut pairs = Vec::new();
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            let (x, y) = (&items[a], &items[b]);
            if x.true_score == y.true_score {
                continue;
            }
            pairs.push(LabeledPair {
                first: x.id.clone(),
                second: y.id.clone(),
                label: x.true_score > y.true_score,
            });
            if ordering == PairOrdering::BothOrders {
                pairs.push(LabeledPair {
                    first: y.id.clone(),
                    second: x.id.clone(),
                    label: y.true_score > x.true_score,
                });
            }
        }
    }
    if ordering == PairOrdering::BothOrders {
        pairs.sort_by(|p, q| (&p.first, &p.second).cmp(&(&q.first, &q.second)));
    }
    pairs
}

/// Number of unordered pairs with exactly equal scores.
pub fn count_excluded_ties(cohort: &Cohort) -> usize {
    let items = cohort.items();
    let mut ties = 0;
    for (i, x) in items.iter().enumerate() {
        ties += items[i + 1..].iter().filter(|y| y.true_score == x.true_score).count();
    }
    ties
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Item;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn cohort(scores: &[(&str, f64)]) -> Cohort {
        Cohort::new(
            scores
                .iter()
                .map(|(id, s)| Item::new(*id, format!("subj-{id}"), *s))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn distinct_scores_give_all_pairs() {
        let c = cohort(&[("A", 1.0), ("B", 2.0), ("C", 3.0), ("D", 4.0)]);
        assert_eq!(generate_pairs(&c, PairOrdering::UnorderedOnce).len(), 6);
        assert_eq!(count_excluded_ties(&c), 0);
    }

    #[test]
    fn tied_pair_is_excluded() {
        let c = cohort(&[("A", 19.0), ("B", 19.0), ("C", 62.0)]);
        let pairs = generate_pairs(&c, PairOrdering::UnorderedOnce);
        let got: Vec<(&str, &str, bool)> = pairs
            .iter()
            .map(|p| (p.first.as_str(), p.second.as_str(), p.label))
            .collect();
        assert_eq!(got, [("A", "C", false), ("B", "C", false)]);
        assert_eq!(count_excluded_ties(&c), 1);
    }

    #[test]
    fn all_equal_scores() {
        let c = cohort(&[("A", 30.0), ("B", 30.0), ("C", 30.0)]);
        assert!(generate_pairs(&c, PairOrdering::UnorderedOnce).is_empty());
        assert_eq!(count_excluded_ties(&c), 3);
    }

    #[test]
    fn both_orders_have_complementary_labels() {
        let c = cohort(&[("C", 5.0), ("A", 1.0), ("B", 3.0)]);
        let pairs = generate_pairs(&c, PairOrdering::BothOrders);
        assert_eq!(pairs.len(), 6);
        for p in &pairs {
            let twin = pairs
                .iter()
                .find(|q| q.first == p.second && q.second == p.first)
                .unwrap();
            assert_ne!(p.label, twin.label);
        }
        let keys: Vec<_> = pairs.iter().map(|p| (p.first.clone(), p.second.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn jsonl_shape() {
        let p = LabeledPair {
            first: "a".into(),
            second: "b".into(),
            label: true,
        };
        let line = serde_json::to_string(&p).unwrap();
        assert_eq!(line, r#"{"first":"a","second":"b","label":1}"#);
        let back: LabeledPair = serde_json::from_str(&line).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<LabeledPair>(r#"{"first":"a","second":"b","label":2}"#).is_err());
    }

    proptest! {
        #[test]
        fn pairs_plus_ties_cover_all_pairs(scores in prop::collection::vec(0u8..8, 1..25)) {
            let items: Vec<Item> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| Item::new(format!("i{i:02}"), "s", f64::from(*s)))
                .collect();
            let c = Cohort::new(items).unwrap();
            let n = c.len();
            let pairs = generate_pairs(&c, PairOrdering::UnorderedOnce);
            prop_assert_eq!(pairs.len() + count_excluded_ties(&c), n * (n - 1) / 2);

            // every item with a differently-scored peer shows up
            let seen: HashSet<&ItemId> = pairs.iter().flat_map(|p| [&p.first, &p.second]).collect();
            for item in c.items() {
                let has_peer = c.items().iter().any(|o| o.true_score != item.true_score);
                prop_assert_eq!(seen.contains(&item.id), has_peer);
            }
            for p in &pairs {
                prop_assert!(p.first < p.second);
                prop_assert_eq!(p.label, c.score(p.first.as_str()) > c.score(p.second.as_str()));
            }
        }
    }
}
