use thiserror::Error;

use crate::model::ItemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("duplicate item id `{0}`")]
    DuplicateId(ItemId),
    #[error("item `{id}` has non-finite score {score}")]
    NonFiniteScore { id: ItemId, score: f64 },
    #[error("unknown item id `{0}`")]
    UnknownId(ItemId),
    #[error("self-pair comparison on item `{0}`")]
    SelfPair(ItemId),
    #[error("strengths do not cover item `{0}`")]
    MissingStrength(ItemId),

    #[error("non-finite input to bt_probability: ({0}, {1})")]
    NonFiniteStrength(f64, f64),
    #[error("oracle comparator cannot order tied items `{0}` and `{1}`")]
    TiedPair(ItemId, ItemId),
    #[error("{kind} comparator requires {what}")]
    MissingInput { kind: &'static str, what: &'static str },
    #[error("invalid comparator config: {0}")]
    InvalidComparator(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature dimension must be at least 1")]
    ZeroDimension,

    #[error("no comparisons in graph")]
    NoComparisons,
    #[error("invalid fit config: {0}")]
    InvalidFitConfig(String),
    #[error(
        "comparison graph is not strongly connected (MLE does not exist without a pseudocount); components: {}",
        format_components(.0)
    )]
    NotStronglyConnected(Vec<Vec<ItemId>>),

    #[error("negative relevance {value} for item `{id}`")]
    NegativeRelevance { id: ItemId, value: f64 },
    #[error("relevance set is empty")]
    EmptyRelevance,
    #[error("ideal DCG is zero; NDCG undefined")]
    ZeroIdcg,
    #[error("need at least {needed} items, found {found}")]
    TooFewItems { needed: usize, found: usize },
    #[error("ground-truth scores have zero variance")]
    ZeroVariance,

    #[error("k must be >= 2, got {0}")]
    InvalidFolds(usize),
    #[error("{subjects} distinct subjects cannot fill {folds} folds")]
    TooFewSubjects { subjects: usize, folds: usize },
    #[error("percentile {0} out of range (0, 100]")]
    PercentileOutOfRange(f64),

    #[error("invalid cohort spec: {0}")]
    InvalidCohortSpec(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_components(components: &[Vec<ItemId>]) -> String {
    components
        .iter()
        .map(|c| {
            let ids: Vec<&str> = c.iter().map(ItemId::as_str).collect();
            format!("{{{}}}", ids.join(", "))
        })
        .collect::<Vec<_>>()
        .join(" | ")
}
