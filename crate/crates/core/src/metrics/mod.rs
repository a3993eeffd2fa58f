//! Rare-predicate evaluation metrics: Predicate ROC-AUC, the two
//! rank-displacement metrics, and the Recall@k family used as reference.

mod auc;
mod displacement;
mod eval_set;
mod predictions;
mod rank;
mod recall;
mod report;

use thiserror::Error;

pub use auc::predicate_auc;
pub use displacement::{pdd, pdo};
pub use eval_set::{EvalEntry, EvalLabel, PredicateEvalSet};
pub use predictions::{
    decode_matrix, encode_matrix, read_prediction_set, write_prediction_set, PredictionMatrix, PredictionRow,
    PredictionSet,
};
pub use rank::{rank_predicates, RankVector};
pub use recall::{ground_truth, mean_recall_at_k, recall_at_k, GroundTruth, MeanRecall};
pub use report::{
    collect_eval_sets, evaluate, mean_row, EvaluateOptions, MeanRow, MetricReport, MissingRowPolicy, PredicateRow,
    RecallSummary, SupportCount,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("score is NaN or infinite")]
    NonFiniteScore,
    #[error("needs at least one positive and one negative (got {positives} positive, {negatives} negative)")]
    InsufficientSupport { positives: usize, negatives: usize },
    #[error("no image has ground truth; recall is undefined")]
    EmptyGroundTruth,
    #[error("displacement metrics need at least 2 predicate classes, got {0}")]
    TooFewPredicates(usize),
    #[error("rank {rank} out of range for {n} predicates")]
    RankOutOfRange { rank: usize, n: usize },
    #[error("no prediction for image {image_id} pair ({subject_idx}, {object_idx})")]
    MissingPrediction { image_id: String, subject_idx: usize, object_idx: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),
    #[error("bad prediction file: {0}")]
    Format(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
