//! Plain-text tables and CSV.

use std::fmt::Write;

use btrank::harness::ExperimentReport;

use crate::commands::RankingFile;

pub fn ranking_table(file: &RankingFile) -> String {
    let width = file
        .ranking
        .iter()
        .map(|r| r.id.as_str().len())
        .max()
        .unwrap_or(2)
        .max(2);
    let mut s = format!("{:>4}  {:<width$}  {:>10}\n", "rank", "id", "strength");
    for r in &file.ranking {
        let _ = writeln!(s, "{:>4}  {:<width$}  {:>10.6}", r.rank, r.id.as_str(), r.strength);
    }
    let _ = writeln!(
        s,
        "{} after {} iterations (last change {:.3e})",
        if file.converged { "converged" } else { "NOT converged" },
        file.iterations,
        file.final_delta
    );
    s
}

pub fn summary_line(r: &ExperimentReport) -> String {
    format!(
        "rho={:.3} ndcg={:.3} tertile_misses={:.3}",
        r.mean_spearman, r.mean_ndcg, r.mean_tertile_misses
    )
}

pub fn ablation_csv(reports: &[ExperimentReport]) -> String {
    let mut s = String::from("comparator,percentile,rho,ndcg,tertile_misses\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.config.comparator.label(),
            r.config.percentile,
            r.mean_spearman,
            r.mean_ndcg,
            r.mean_tertile_misses
        );
    }
    s
}

pub fn ablation_table(reports: &[ExperimentReport]) -> String {
    let mut s = format!(
        "{:>10}  {:>7}  {:>7}  {:>14}\n",
        "percentile", "rho", "ndcg", "tertile_misses"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:>10}  {:>7.4}  {:>7.4}  {:>14.3}",
            r.config.percentile, r.mean_spearman, r.mean_ndcg, r.mean_tertile_misses
        );
    }
    s
}

pub fn report_text(r: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "comparator   {}", r.config.comparator.label());
    let _ = writeln!(
        s,
        "cohort       {} items, {} used ({}%), sha256 {}",
        r.provenance.n_items, r.provenance.n_subsampled, r.config.percentile, r.provenance.cohort_hash
    );
    let _ = writeln!(s, "master seed  {}", r.provenance.master_seed);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>4}  {:>7}  {:>6}  {:>7}  {:>7}  {:>14}  {:>9}",
        "fold", "n_train", "n_test", "rho", "ndcg", "tertile_misses", "converged"
    );
    for f in &r.per_fold {
        let _ = writeln!(
            s,
            "{:>4}  {:>7}  {:>6}  {:>7.4}  {:>7.4}  {:>14}  {:>9}",
            f.fold,
            f.n_train,
            f.metrics.n_items,
            f.metrics.spearman_rho,
            f.metrics.ndcg,
            f.metrics.tertile_misses,
            f.bt_converged
        );
    }
    let _ = writeln!(
        s,
        "{:>4}  {:>7}  {:>6}  {:>7.4}  {:>7.4}  {:>14.3}",
        "mean", "", "", r.mean_spearman, r.mean_ndcg, r.mean_tertile_misses
    );
    s
}
