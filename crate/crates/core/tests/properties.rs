use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use btrank::bt::{fit, FitConfig};
use btrank::comparators::{ComparatorConfig, FeatureSpec};
use btrank::harness::{run_experiment, synthetic_cohort, ExperimentConfig};
use btrank::logistic::TrainingHyper;
use btrank::{ComparisonGraph, ItemId};

fn mean_ndcg(cohort: &btrank::Cohort, comparator: &ComparatorConfig, seeds: u64) -> (f64, f64) {
    let (mut ndcg, mut rho) = (0.0, 0.0);
    for seed in 0..seeds {
        let r = run_experiment(cohort, &ExperimentConfig::new(comparator.clone(), seed)).unwrap();
        ndcg += r.mean_ndcg;
        rho += r.mean_spearman;
    }
    (ndcg / seeds as f64, rho / seeds as f64)
}

#[test]
fn less_noise_gives_higher_ndcg() {
    let cohort = synthetic_cohort(140, 39, 19.0, 62.0, 11).unwrap();
    let (low, _) = mean_ndcg(&cohort, &ComparatorConfig::bt_noisy(0.05), 100);
    let (high, _) = mean_ndcg(&cohort, &ComparatorConfig::bt_noisy(0.5), 100);
    assert!(high > low, "beta 0.5 gave {high}, beta 0.05 gave {low}");
}

#[test]
fn pure_noise_has_no_rank_signal() {
    let cohort = synthetic_cohort(30, 9, 19.0, 62.0, 12).unwrap();
    let (_, rho) = mean_ndcg(&cohort, &ComparatorConfig::bt_noisy(0.0), 200);
    assert!(rho.abs() < 0.1, "mean rho {rho}");
}

#[test]
fn feature_noise_hurts_logistic_comparator() {
    let cohort = synthetic_cohort(40, 12, 19.0, 62.0, 13).unwrap();
    let hyper = TrainingHyper {
        epochs: 50,
        ..TrainingHyper::default()
    };
    let clean = ComparatorConfig::logistic(
        FeatureSpec {
            dim: 8,
            noise_scale: 0.0,
        },
        hyper.clone(),
    );
    let noisy = ComparatorConfig::logistic(
        FeatureSpec {
            dim: 8,
            noise_scale: 10.0,
        },
        hyper,
    );
    let (clean, _) = mean_ndcg(&cohort, &clean, 100);
    let (noisy, _) = mean_ndcg(&cohort, &noisy, 100);
    assert!(noisy < clean, "noise 10 gave {noisy}, noise 0 gave {clean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // With every pair compared the same number of times, fitted strengths are
    // ordered exactly as win totals.
    #[test]
    fn round_robin_strengths_follow_win_totals(n in 3usize..25, seed in any::<u64>(), eps in 0.05f64..1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<ItemId> = (0..n).map(|i| ItemId::new(format!("r{i:02}"))).collect();
        let mut g = ComparisonGraph::new(ids.clone()).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let (w, l) = if r.random::<bool>() { (i, j) } else { (j, i) };
                g.add_wins(ids[w].as_str(), ids[l].as_str(), 1).unwrap();
            }
        }
        let result = fit(&g, &FitConfig { epsilon: eps, tolerance: 1e-13, ..FitConfig::default() }).unwrap();
        let wins = g.win_totals();
        for i in 0..n {
            for j in 0..n {
                if wins[i] > wins[j] {
                    let (si, sj) = (result.strengths.get(ids[i].as_str()).unwrap(), result.strengths.get(ids[j].as_str()).unwrap());
                    prop_assert!(si > sj, "{} wins {} vs {} wins {}: {si} <= {sj}", ids[i], wins[i], ids[j], wins[j]);
                }
            }
        }
    }
}
