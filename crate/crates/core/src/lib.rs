//! Rank a population from pairwise "which of these two is higher?" judgments.
//!
//! Judgments come from a [`comparators::Comparator`] (ground-truth oracle,
//! Bradley-Terry noise, random flips, or a trained logistic pair model),
//! are counted into a [`ComparisonGraph`], and are turned into per-item
//! log-strengths by Bradley-Terry maximum likelihood ([`bt::fit`]). The
//! resulting [`Ranking`] is scored with NDCG, Spearman's rho and upper-tertile
//! misses ([`metrics`]). [`harness`] runs the whole loop under subject-disjoint
//! cross-validation with optional subsampling.
//!
//! ```
//! use btrank::bt::{fit, FitConfig};
//! use btrank::ComparisonGraph;
//!
//! let mut graph = ComparisonGraph::new(vec!["a".into(), "b".into()])?;
//! graph.add_wins("a", "b", 3)?;
//! graph.add_wins("b", "a", 1)?;
//! let result = fit(&graph, &FitConfig::default())?;
//! let gap = result.strengths.get("a").unwrap() - result.strengths.get("b").unwrap();
//! assert!((gap - 3f64.ln()).abs() < 1e-6);
//! # Ok::<(), btrank::Error>(())
//! ```
//!
//! The guide under `book/` walks through each stage; its code samples are
//! compiled and run as doc-tests of this crate.

pub mod bt;
pub mod comparators;
mod error;
pub mod harness;
pub mod io;
pub mod logistic;
pub mod metrics;
mod model;
pub mod pairs;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    ranking_from_strengths, validate_cohort, Cohort, ComparisonGraph, ComparisonRecord, Item, ItemId, Ranking,
    ScoreMap, StrengthVector,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/comparators.md")]
    mod comparators {}
    #[doc = include_str!("../../../book/src/bradley-terry.md")]
    mod bradley_terry {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
