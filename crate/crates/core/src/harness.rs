//! Cross-validated evaluation of the pairwise pipeline.
//!
//! Per fold: train the comparator on non-tied pairs of the training items,
//! predict every unordered pair of test items once, fit Bradley-Terry on
//! those predictions, rank, and score against the test ground truth.
//! Folds split subjects, not items, so no subject is on both sides.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bt::{aggregate_comparisons, fit, win_count_ranking, FitConfig};
use crate::comparators::{Comparator, ComparatorConfig, ComparatorKind};
use crate::error::{Error, Result};
use crate::io::write_cohort_csv;
use crate::logistic::{fit_logistic, generate_features, FeatureCohort, LogisticPairModel};
use crate::metrics::{evaluate, MetricReport};
use crate::model::{Cohort, Item, Ranking};
use crate::pairs::{generate_pairs, PairOrdering};
use crate::rng::{derive_seed, stream};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// How the per-fold ranking is produced from predicted comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranker {
    #[default]
    BradleyTerry,
    /// Sort by raw win totals.
    WinCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    pub comparator: ComparatorConfig,
    #[serde(default = "harness_fit")]
    pub fit: FitConfig,
    #[serde(default)]
    pub pair_ordering: PairOrdering,
    #[serde(default)]
    pub ranker: Ranker,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_folds() -> usize {
    3
}

fn default_percentile() -> f64 {
    100.0
}

/// Harness default: a small pseudocount so undefeated items keep finite strength.
pub fn harness_fit() -> FitConfig {
    FitConfig::with_epsilon(0.1)
}

impl ExperimentConfig {
    pub fn new(comparator: ComparatorConfig, master_seed: u64) -> Self {
        Self {
            folds: default_folds(),
            percentile: default_percentile(),
            comparator,
            fit: harness_fit(),
            pair_ordering: PairOrdering::UnorderedOnce,
            ranker: Ranker::BradleyTerry,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidFolds(self.folds));
        }
        check_percentile(self.percentile)?;
        self.comparator.validate()?;
        self.fit.validate()
    }
}

fn check_percentile(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p <= 100.0 {
        Ok(())
    } else {
        Err(Error::PercentileOutOfRange(p))
    }
}

/// Random cohort of `n` items over `subjects` subjects with integer scores
/// drawn uniformly from `[ceil(score_min), floor(score_max)]`.
///
/// The first `subjects` items go one to each subject so every subject owns
/// at least one item; the rest are assigned uniformly.
pub fn synthetic_cohort(n: usize, subjects: usize, score_min: f64, score_max: f64, seed: u64) -> Result<Cohort> {
    if subjects < 1 || n < subjects {
        return Err(Error::InvalidCohortSpec(format!(
            "need n >= subjects >= 1, got n={n}, subjects={subjects}"
        )));
    }
    if !(score_min.is_finite() && score_max.is_finite() && score_min < score_max) {
        return Err(Error::InvalidCohortSpec(format!(
            "need score_min < score_max, got [{score_min}, {score_max}]"
        )));
    }
    let (lo, hi) = (score_min.ceil() as i64, score_max.floor() as i64);
    if lo > hi {
        return Err(Error::InvalidCohortSpec(format!(
            "no integer score in [{score_min}, {score_max}]"
        )));
    }
    let id_width = (n.max(2) - 1).to_string().len();
    let subject_width = (subjects.max(2) - 1).to_string().len();
    let mut rng = stream(seed, "cohort", 0);
    let items = (0..n)
        .map(|i| {
            let subject = if i < subjects { i } else { rng.random_range(0..subjects) };
            let score = rng.random_range(lo..=hi) as f64;
            Item::new(
                format!("item-{i:0id_width$}"),
                format!("subj-{subject:0subject_width$}"),
                score,
            )
        })
        .collect();
    Cohort::new(items)
}

/// Subject-disjoint `(train, test)` splits.
///
/// Sorted subject ids are shuffled by `seed` and cut into `k` contiguous
/// parts whose sizes differ by at most one. Items keep cohort order.
pub fn fold_split(cohort: &Cohort, k: usize, seed: u64) -> Result<Vec<(Cohort, Cohort)>> {
    if k < 2 {
        return Err(Error::InvalidFolds(k));
    }
    let mut subjects: Vec<&str> = cohort.subjects();
    if subjects.len() < k {
        return Err(Error::TooFewSubjects {
            subjects: subjects.len(),
            folds: k,
        });
    }
    subjects.shuffle(&mut stream(seed, "fold-split", 0));
    let (base, extra) = (subjects.len() / k, subjects.len() % k);
    let mut part_of = std::collections::HashMap::new();
    let mut cursor = 0;
    for part in 0..k {
        let size = base + usize::from(part < extra);
        for s in &subjects[cursor..cursor + size] {
            part_of.insert(*s, part);
        }
        cursor += size;
    }
    Ok((0..k)
        .map(|part| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..cohort.len()).partition(|&i| part_of[cohort.items()[i].subject_id.as_str()] == part);
            (cohort.select(train), cohort.select(test))
        })
        .collect())
}

/// Keeps `floor(n * p / 100)` items chosen uniformly without replacement, in cohort order.
pub fn percentile_subsample(cohort: &Cohort, p: f64, seed: u64) -> Result<Cohort> {
    check_percentile(p)?;
    if p == 100.0 {
        return Ok(cohort.clone());
    }
    let n = cohort.len();
    let keep = ((n as f64 * p) / 100.0).floor() as usize;
    let mut chosen = index::sample(&mut stream(seed, "subsample", 0), n, keep).into_vec();
    chosen.sort_unstable();
    Ok(cohort.select(chosen))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    #[serde(flatten)]
    pub metrics: MetricReport,
    pub bt_converged: bool,
    pub bt_iterations: usize,
}

/// Features and model trained for one fold; `None` for stateless comparators.
type Trained = Option<(FeatureCohort, LogisticPairModel)>;

fn train_comparator(train: &Cohort, test: &Cohort, cfg: &ExperimentConfig, fold_seed: u64) -> Result<Trained> {
    if cfg.comparator.kind != ComparatorKind::Logistic {
        return Ok(None);
    }
    // sorted so every fold of one experiment sees the same feature draws
    let mut items: Vec<_> = train.items().iter().chain(test.items()).cloned().collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    let everyone = Cohort::new(items)?;
    let spec = &cfg.comparator.features;
    let features = generate_features(
        &everyone,
        spec.dim,
        spec.noise_scale,
        derive_seed(cfg.comparator.seed, "features", cfg.master_seed),
    )?;
    let pairs = generate_pairs(train, cfg.pair_ordering);
    let mut hyper = cfg.comparator.training.clone();
    hyper.seed = derive_seed(hyper.seed, "train", fold_seed);
    let model = fit_logistic(&pairs, &features, &hyper)?;
    Ok(Some((features, model)))
}

/// Runs one fold of the pipeline. `fold_seed` selects the fold's random substream.
pub fn run_fold(train: &Cohort, test: &Cohort, cfg: &ExperimentConfig, fold_seed: u64) -> Result<FoldReport> {
    if test.len() < 3 {
        return Err(Error::TooFewItems {
            needed: 3,
            found: test.len(),
        });
    }
    let trained = train_comparator(train, test, cfg, fold_seed)?;
    let comparator = match &trained {
        None => Comparator::new(&cfg.comparator, test, None, None)?,
        Some((f, m)) => Comparator::new(&cfg.comparator, test, Some(f), Some(m))?,
    };
    let mut rng = stream(
        derive_seed(cfg.master_seed, "comparisons", cfg.comparator.seed),
        "fold",
        fold_seed,
    );
    let records = comparator.round_robin(&mut rng)?;
    let graph = aggregate_comparisons(&records, test)?;
    let result = fit(&graph, &cfg.fit)?;
    let ranking: Ranking = match cfg.ranker {
        Ranker::BradleyTerry => result.ranking(),
        Ranker::WinCount => win_count_ranking(&graph),
    };
    Ok(FoldReport {
        fold: 0,
        n_train: train.len(),
        metrics: evaluate(&ranking, &test.scores())?,
        bt_converged: result.converged,
        bt_iterations: result.iterations_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    /// SHA-256 of the input cohort's canonical CSV.
    pub cohort_hash: String,
    pub n_items: usize,
    pub n_subsampled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub per_fold: Vec<FoldReport>,
    pub mean_spearman: f64,
    pub mean_ndcg: f64,
    pub mean_tertile_misses: f64,
    pub all_converged: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn cohort_hash(cohort: &Cohort) -> Result<String> {
    let mut bytes = Vec::new();
    write_cohort_csv(&mut bytes, cohort)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Subsample, split, run every fold and average.
pub fn run_experiment(cohort: &Cohort, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let subset = percentile_subsample(cohort, cfg.percentile, derive_seed(cfg.master_seed, "percentile", 0))?;
    let folds = fold_split(&subset, cfg.folds, derive_seed(cfg.master_seed, "folds", 0))?;
    let per_fold = folds
        .iter()
        .enumerate()
        .map(|(i, (train, test))| {
            run_fold(train, test, cfg, i as u64).map(|mut r| {
                r.fold = i;
                r
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        config: cfg.clone(),
        provenance: Provenance {
            master_seed: cfg.master_seed,
            cohort_hash: cohort_hash(cohort)?,
            n_items: cohort.len(),
            n_subsampled: subset.len(),
        },
        mean_spearman: mean(per_fold.iter().map(|f| f.metrics.spearman_rho)),
        mean_ndcg: mean(per_fold.iter().map(|f| f.metrics.ndcg)),
        mean_tertile_misses: mean(per_fold.iter().map(|f| f.metrics.tertile_misses as f64)),
        all_converged: per_fold.iter().all(|f| f.bt_converged),
        per_fold,
    })
}
