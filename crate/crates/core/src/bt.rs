//! Bradley-Terry maximum-likelihood inference.
//!
//! Strengths are fitted with the minorization-maximization update
//!
//! ```text
//! pi_i <- W_i / sum_{j != i} n_ij / (pi_i + pi_j)
//! ```
//!
//! where `W_i` is item `i`'s total (regularized) wins and `n_ij` the number
//! of comparisons between `i` and `j`. Each step cannot decrease the
//! log-likelihood. Without a pseudocount the MLE exists only when the
//! directed win graph is strongly connected; that is checked up front.

use serde::{Deserialize, Serialize};

use crate::comparators::bt_probability;
use crate::error::{Error, Result};
use crate::model::{Cohort, ComparisonGraph, ComparisonRecord, ItemId, Ranking, StrengthVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Virtual wins added in each direction on every pair with at least one real comparison.
    pub epsilon: f64,
    /// Stop once the largest log-strength change falls to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

impl FitConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidFitConfig(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidFitConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidFitConfig("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub strengths: StrengthVector,
    #[serde(rename = "iterations")]
    pub iterations_used: usize,
    pub converged: bool,
    pub final_delta: f64,
    /// Items that took part in no comparison; their log-strength is 0.
    pub unpaired: Vec<ItemId>,
}

impl FitResult {
    pub fn ranking(&self) -> Ranking {
        self.strengths.ranking()
    }
}

/// Counts records into a graph over the cohort's items.
pub fn aggregate_comparisons(records: &[ComparisonRecord], cohort: &Cohort) -> Result<ComparisonGraph> {
    let mut graph = ComparisonGraph::new(cohort.ids().cloned().collect())?;
    for r in records {
        if r.winner == r.loser {
            return Err(Error::SelfPair(r.winner.clone()));
        }
        graph.add_wins(r.winner.as_str(), r.loser.as_str(), 1)?;
    }
    Ok(graph)
}

/// Strongly connected components of the directed win graph (edge `i -> j`
/// when `i` beat `j`), restricted to items with at least one comparison.
/// Components are returned with sorted ids, ordered by their smallest id.
pub fn win_graph_components(graph: &ComparisonGraph) -> Vec<Vec<ItemId>> {
    let n = graph.len();
    let active: Vec<bool> = (0..n).map(|i| (0..n).any(|j| graph.comparisons_at(i, j) > 0)).collect();
    let forward: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| graph.wins_at(i, j) > 0).collect())
        .collect();
    let reverse: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| graph.wins_at(j, i) > 0).collect())
        .collect();

    // Kosaraju: finishing order on the forward graph, then sweep the reverse graph.
    let mut visited = vec![false; n];
    let mut finish = Vec::with_capacity(n);
    for start in (0..n).filter(|&i| active[i]) {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((node, next)) = stack.pop() {
            if let Some(&child) = forward[node].get(next) {
                stack.push((node, next + 1));
                if !visited[child] {
                    visited[child] = true;
                    stack.push((child, 0));
                }
            } else {
                finish.push(node);
            }
        }
    }

    let mut assigned = vec![false; n];
    let mut components = Vec::new();
    for &root in finish.iter().rev() {
        if assigned[root] {
            continue;
        }
        assigned[root] = true;
        let mut component = Vec::new();
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            component.push(graph.item_ids()[node].clone());
            for &next in &reverse[node] {
                if !assigned[next] {
                    assigned[next] = true;
                    stack.push(next);
                }
            }
        }
        component.sort();
        components.push(component);
    }
    components.sort();
    components
}

/// Iterative MM state over a regularized comparison graph.
///
/// Exposed so callers can observe the likelihood trajectory; [`fit`] drives it
/// to convergence.
#[derive(Debug, Clone)]
pub struct MmSolver {
    ids: Vec<ItemId>,
    /// Per active item: `(neighbour, n_ij, w_ij)` on regularized counts.
    neighbours: Vec<Vec<(usize, f64, f64)>>,
    log_wins: Vec<f64>,
    active: Vec<usize>,
    theta: Vec<f64>,
}

impl MmSolver {
    pub fn new(graph: &ComparisonGraph, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidFitConfig(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if graph.total_comparisons() == 0 {
            return Err(Error::NoComparisons);
        }
        if epsilon == 0.0 {
            let components = win_graph_components(graph);
            if components.len() > 1 {
                return Err(Error::NotStronglyConnected(components));
            }
        }
        let n = graph.len();
        let mut neighbours = vec![Vec::new(); n];
        let mut log_wins = vec![0.0; n];
        let mut active = Vec::new();
        for (i, row) in neighbours.iter_mut().enumerate() {
            let mut total = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                let real = graph.comparisons_at(i, j);
                if real == 0 {
                    continue;
                }
                let w_ij = graph.wins_at(i, j) as f64 + epsilon;
                let n_ij = real as f64 + 2.0 * epsilon;
                total += w_ij;
                row.push((j, n_ij, w_ij));
            }
            if !row.is_empty() {
                active.push(i);
                log_wins[i] = total.ln();
            }
        }
        Ok(Self {
            ids: graph.item_ids().to_vec(),
            neighbours,
            log_wins,
            active,
            theta: vec![0.0; n],
        })
    }

    /// Current log-strengths, mean zero over compared items; others are 0.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn unpaired(&self) -> Vec<ItemId> {
        (0..self.ids.len())
            .filter(|&i| self.neighbours[i].is_empty())
            .map(|i| self.ids[i].clone())
            .collect()
    }

    /// Regularized log-likelihood `sum_{i != j} w_ij * ln P(i beats j)` at the current iterate.
    pub fn log_likelihood(&self) -> f64 {
        log_likelihood_at(&self.neighbours, &self.theta)
    }

    /// One parallel MM update; returns the largest absolute change in log-strength.
    pub fn step(&mut self) -> f64 {
        let theta = &self.theta;
        let mut next = theta.clone();
        for &i in &self.active {
            let ti = theta[i];
            // ln sum_j n_ij / (e^ti + e^tj), accumulated relative to e^{-ti}
            let denom: f64 = self.neighbours[i]
                .iter()
                .map(|&(j, n_ij, _)| n_ij / (1.0 + (theta[j] - ti).exp()))
                .sum();
            next[i] = self.log_wins[i] + ti - denom.ln();
        }
        let mean = self.active.iter().map(|&i| next[i]).sum::<f64>() / self.active.len() as f64;
        let mut delta = 0.0f64;
        for &i in &self.active {
            next[i] -= mean;
            delta = delta.max((next[i] - theta[i]).abs());
        }
        self.theta = next;
        delta
    }

    pub fn strengths(&self) -> Result<StrengthVector> {
        StrengthVector::new(self.ids.clone(), self.theta.clone())
    }
}

fn log_likelihood_at(neighbours: &[Vec<(usize, f64, f64)>], theta: &[f64]) -> f64 {
    neighbours
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().map(move |&(j, _, w_ij)| {
                // ln sigma(d) = -softplus(-d)
                let d = theta[i] - theta[j];
                let log_p = if d >= 0.0 {
                    -(-d).exp().ln_1p()
                } else {
                    d - d.exp().ln_1p()
                };
                w_ij * log_p
            })
        })
        .sum()
}

/// Regularized log-likelihood of arbitrary log-strengths aligned with `graph.item_ids()`.
pub fn log_likelihood(graph: &ComparisonGraph, epsilon: f64, theta: &[f64]) -> Result<f64> {
    let n = graph.len();
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta.len(),
        });
    }
    let neighbours: Vec<Vec<(usize, f64, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && graph.comparisons_at(i, j) > 0)
                .map(|j| (j, 0.0, graph.wins_at(i, j) as f64 + epsilon))
                .collect()
        })
        .collect();
    Ok(log_likelihood_at(&neighbours, theta))
}

/// Fits mean-zero log-strengths from uniform initialization.
///
/// Hitting `max_iterations` is not an error: the result carries
/// `converged = false` and the last iterate.
pub fn fit(graph: &ComparisonGraph, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let mut solver = MmSolver::new(graph, cfg.epsilon)?;
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    let mut converged = false;
    #[cfg(debug_assertions)]
    let mut last_ll = solver.log_likelihood();
    while iterations < cfg.max_iterations {
        delta = solver.step();
        iterations += 1;
        #[cfg(debug_assertions)]
        {
            let ll = solver.log_likelihood();
            debug_assert!(ll >= last_ll - 1e-9 * (1.0 + last_ll.abs()), "MM decreased likelihood");
            last_ll = ll;
        }
        if delta <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        strengths: solver.strengths()?,
        iterations_used: iterations,
        converged,
        final_delta: delta,
        unpaired: solver.unpaired(),
    })
}

/// `P(i ranks above j)` under the fitted strengths.
pub fn predict_from_fit(result: &FitResult, i: &str, j: &str) -> Result<f64> {
    let si = result.strengths.get(i).ok_or_else(|| Error::UnknownId(i.into()))?;
    let sj = result.strengths.get(j).ok_or_else(|| Error::UnknownId(j.into()))?;
    bt_probability(si, sj)
}

/// Baseline ranking by raw win totals; equal totals go to the smaller id.
pub fn win_count_ranking(graph: &ComparisonGraph) -> Ranking {
    let totals = graph.win_totals();
    let ids = graph.item_ids();
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then_with(|| ids[a].cmp(&ids[b])));
    Ranking::new(order.into_iter().map(|i| ids[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Item;
    use proptest::prelude::*;

    fn graph(ids: &[&str], wins: &[(&str, &str, u64)]) -> ComparisonGraph {
        let mut g = ComparisonGraph::new(ids.iter().map(|&s| ItemId::from(s)).collect()).unwrap();
        for &(w, l, c) in wins {
            g.add_wins(w, l, c).unwrap();
        }
        g
    }

    fn gap(result: &FitResult, a: &str, b: &str) -> f64 {
        result.strengths.get(a).unwrap() - result.strengths.get(b).unwrap()
    }

    #[test]
    fn aggregate_counts_and_errors() {
        let cohort = Cohort::new(vec![Item::new("A", "s", 1.0), Item::new("B", "s", 2.0)]).unwrap();
        let g = aggregate_comparisons(&[], &cohort).unwrap();
        assert_eq!(g.total_comparisons(), 0);
        let records = [
            ComparisonRecord::new("A", "B"),
            ComparisonRecord::new("A", "B"),
            ComparisonRecord::new("B", "A"),
        ];
        let g = aggregate_comparisons(&records, &cohort).unwrap();
        assert_eq!((g.wins("A", "B"), g.wins("B", "A")), (2, 1));
        assert!(matches!(
            aggregate_comparisons(&[ComparisonRecord::new("A", "A")], &cohort),
            Err(Error::SelfPair(_))
        ));
        assert!(matches!(
            aggregate_comparisons(&[ComparisonRecord::new("A", "Z")], &cohort),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn two_item_closed_forms() {
        let r = fit(
            &graph(&["A", "B"], &[("A", "B", 3), ("B", "A", 1)]),
            &FitConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!((gap(&r, "A", "B") - 3f64.ln()).abs() < 1e-6);
        assert!((predict_from_fit(&r, "A", "B").unwrap() - 0.75).abs() < 1e-6);

        let one_sided = graph(&["A", "B"], &[("A", "B", 4)]);
        match fit(&one_sided, &FitConfig::default()) {
            Err(Error::NotStronglyConnected(c)) => assert_eq!(c.len(), 2),
            other => panic!("expected connectivity error, got {other:?}"),
        }
        let r = fit(&one_sided, &FitConfig::with_epsilon(0.5)).unwrap();
        assert!((gap(&r, "A", "B") - 9f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn circular_graph_is_symmetric() {
        let g = graph(&["A", "B", "C"], &[("A", "B", 1), ("B", "C", 1), ("C", "A", 1)]);
        let r = fit(&g, &FitConfig::default()).unwrap();
        for (_, v) in r.strengths.iter() {
            assert!(v.abs() < 1e-12);
        }
        let ranking = r.ranking();
        let ids: Vec<&str> = ranking.ids().iter().map(ItemId::as_str).collect();
        assert_eq!(ids, ["A", "B", "C"]);
        assert_eq!(predict_from_fit(&r, "A", "C").unwrap(), 0.5);
        assert!(predict_from_fit(&r, "A", "Q").is_err());
    }

    #[test]
    fn unpaired_items_stay_at_zero() {
        let g = graph(&["A", "B", "C"], &[("A", "B", 2), ("B", "A", 1)]);
        let r = fit(&g, &FitConfig::default()).unwrap();
        assert_eq!(r.unpaired, vec![ItemId::from("C")]);
        assert_eq!(r.strengths.get("C"), Some(0.0));
        assert!((gap(&r, "A", "B") - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn empty_graph_and_bad_config() {
        let g = graph(&["A", "B"], &[]);
        assert!(matches!(fit(&g, &FitConfig::default()), Err(Error::NoComparisons)));
        let g = graph(&["A", "B"], &[("A", "B", 1), ("B", "A", 1)]);
        let bad = FitConfig {
            tolerance: 0.0,
            ..FitConfig::default()
        };
        assert!(matches!(fit(&g, &bad), Err(Error::InvalidFitConfig(_))));
    }

    #[test]
    fn component_split_is_named() {
        // {A,B} beat {C,D}; each side internally cyclic
        let g = graph(
            &["A", "B", "C", "D"],
            &[
                ("A", "B", 1),
                ("B", "A", 1),
                ("C", "D", 1),
                ("D", "C", 1),
                ("A", "C", 1),
            ],
        );
        let err = fit(&g, &FitConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("{A, B} | {C, D}"), "{msg}");
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let g = graph(
            &["A", "B", "C"],
            &[
                ("A", "B", 5),
                ("B", "A", 1),
                ("B", "C", 3),
                ("C", "B", 2),
                ("C", "A", 1),
                ("A", "C", 1),
            ],
        );
        let cfg = FitConfig {
            max_iterations: 1,
            ..FitConfig::default()
        };
        let r = fit(&g, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations_used, 1);
        assert!(r.final_delta > cfg.tolerance);
    }

    #[test]
    fn win_count_baseline() {
        let g = graph(&["A", "B", "C"], &[("C", "A", 2), ("B", "A", 2)]);
        let ranking = win_count_ranking(&g);
        let ids: Vec<&str> = ranking.ids().iter().map(ItemId::as_str).collect();
        assert_eq!(ids, ["B", "C", "A"]);
    }

    #[test]
    fn fit_result_json_fields() {
        let r = fit(
            &graph(&["A", "B"], &[("A", "B", 3), ("B", "A", 1)]),
            &FitConfig::default(),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert!(v["strengths"]["A"].is_f64());
        assert!(v["iterations"].is_u64());
        assert_eq!(v["converged"], true);
    }

    proptest! {
        #[test]
        fn two_item_gap_is_log_ratio(w1 in 1u64..200, w2 in 1u64..200) {
            let r = fit(&graph(&["A", "B"], &[("A", "B", w1), ("B", "A", w2)]), &FitConfig::default()).unwrap();
            prop_assert!((gap(&r, "A", "B") - (w1 as f64 / w2 as f64).ln()).abs() < 1e-6);
            let more = fit(&graph(&["A", "B"], &[("A", "B", w1 + 1), ("B", "A", w2)]), &FitConfig::default()).unwrap();
            prop_assert!(gap(&more, "A", "B") > gap(&r, "A", "B"));
        }

        #[test]
        fn relabeling_permutes_strengths(
            wins in prop::collection::vec(0u64..4, 30),
            rotate in 0usize..6,
        ) {
            let names = ["a", "b", "c", "d", "e", "f"];
            let mut g = graph(&names, &[]);
            let mut relabeled_names = names;
            relabeled_names.rotate_left(rotate);
            let mut h = graph(&names, &[]);
            let mut k = 0;
            for i in 0..6 {
                for j in 0..6 {
                    if i == j { continue; }
                    g.add_wins(names[i], names[j], wins[k]).unwrap();
                    h.add_wins(relabeled_names[i], relabeled_names[j], wins[k]).unwrap();
                    k += 1;
                }
            }
            let cfg = FitConfig::with_epsilon(0.1);
            let (Ok(rg), Ok(rh)) = (fit(&g, &cfg), fit(&h, &cfg)) else { return Ok(()); };
            for i in 0..6 {
                let a = rg.strengths.get(names[i]).unwrap();
                let b = rh.strengths.get(relabeled_names[i]).unwrap();
                prop_assert!((a - b).abs() < 1e-8);
            }
            let mean: f64 = rg.strengths.values().iter().sum::<f64>() / 6.0;
            prop_assert!(mean.abs() <= 1e-12);
        }
    }
}
