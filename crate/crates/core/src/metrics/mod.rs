//! Evaluation maths: confusion summaries, PR curves, annotator ensembles,
//! masked edit-distance diversity and per-index series.

mod confusion;
mod diversity;
mod pr;
mod series;

use thiserror::Error;

use crate::dsl::DslError;

pub use confusion::{confusion_summary, round_percent, ConfusionCounts, ConfusionSummary};
pub use diversity::{
    code_length, diversity_across_tables, edit_distance, pairwise_diversity, prefix_diversity, DiversityAggregation,
    DiversityReport,
};
pub use pr::{ensemble_labels, pr_curve, pr_curve_to_csv, precision_at_recall, PrPoint};
pub use series::{
    bucket_by_column_count, bucket_labels, bucket_slot, buckets_to_csv, index_series_to_csv, series_by_index, Bucket, IndexPoint, IndexSeries,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no positive labels")]
    NoPositives,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("no annotators")]
    NoAnnotators,
    #[error("code #{index} does not lex: {error}")]
    Lex { index: usize, error: DslError },
    #[error("bucket edges must be strictly increasing")]
    BadEdges,
}
