//! Column statistics and the groupby/aggregation candidate predictor.

mod features;
mod stats;
mod tree;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{
    feature_vector, synthetic_groupby_columns, synthetic_groupby_corpus, synthetic_groupby_label, SyntheticColumn,
    FEATURE_NAMES, FEATURE_SCHEMA_VERSION,
};
pub use stats::{entropy, profile_column, profile_table, ColumnProfile, TableProfile};
pub use tree::{load_training_csv, train_tree, train_tree_named, DecisionTree, Sample, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("column `{0}` has no cells")]
    EmptyColumn(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("row {row}: expected {expected} features, found {found}")]
    InconsistentFeatures { row: usize, expected: usize, found: usize },
    #[error("row {row}: non-finite feature value")]
    NonFiniteFeature { row: usize },
    #[error("row {row}: label {label} is not 0 or 1")]
    BadLabel { row: usize, label: u8 },
    #[error("tree was trained on features {found:?} (schema v{version}), expected the v{FEATURE_SCHEMA_VERSION} layout")]
    SchemaMismatch { version: u32, found: Vec<String> },
    #[error("bad model file: {0}")]
    ModelFile(String),
    #[error("bad training data: {0}")]
    TrainingData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRole {
    GroupKey,
    AggregateTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupbyCandidate {
    pub column_name: String,
    pub score: f64,
    pub role: CandidateRole,
}

fn sort_candidates(cands: &mut [(usize, GroupbyCandidate)]) {
    cands.sort_by(|(pa, a), (pb, b)| b.score.total_cmp(&a.score).then(pa.cmp(pb)));
}

/// One `GroupKey` candidate per column, scored by the tree's positive-class
/// probability, highest first; equal scores keep column order.
pub fn predict_groupby(tree: &DecisionTree, profile: &TableProfile) -> Result<Vec<GroupbyCandidate>, ProfileError> {
    if tree.schema_version != FEATURE_SCHEMA_VERSION || tree.feature_names.iter().map(String::as_str).ne(FEATURE_NAMES) {
        return Err(ProfileError::SchemaMismatch {
            version: tree.schema_version,
            found: tree.feature_names.clone(),
        });
    }
    let mut cands: Vec<(usize, GroupbyCandidate)> = profile
        .column_profiles
        .iter()
        .map(|p| {
            let x = feature_vector(p, profile.row_count);
            (
                p.position,
                GroupbyCandidate {
                    column_name: p.name.clone(),
                    score: tree.predict_proba(&x),
                    role: CandidateRole::GroupKey,
                },
            )
        })
        .collect();
    sort_candidates(&mut cands);
    Ok(cands.into_iter().map(|(_, c)| c).collect())
}

/// Numeric columns as `AggregateTarget`s, ranked by entropy. The score is
/// entropy normalized by `log2(row_count)`, so it lies in `[0, 1]`.
pub fn aggregate_targets(profile: &TableProfile) -> Vec<GroupbyCandidate> {
    let max_h = (profile.row_count.max(2) as f64).log2();
    let mut cands: Vec<(usize, GroupbyCandidate)> = profile
        .column_profiles
        .iter()
        .filter(|p| p.dtype.is_numeric())
        .map(|p| {
            (
                p.position,
                GroupbyCandidate {
                    column_name: p.name.clone(),
                    score: (p.entropy / max_h).clamp(0.0, 1.0),
                    role: CandidateRole::AggregateTarget,
                },
            )
        })
        .collect();
    sort_candidates(&mut cands);
    cands.into_iter().map(|(_, c)| c).collect()
}

/// Seed of the corpus behind [`default_groupby_tree`].
pub const DEFAULT_TREE_SEED: u64 = 20_231_207;

/// Tree trained on 2,000 synthetic columns; used when no model file is
/// configured.
pub fn default_groupby_tree() -> &'static DecisionTree {
    static TREE: OnceLock<DecisionTree> = OnceLock::new();
    TREE.get_or_init(|| {
        let corpus = synthetic_groupby_corpus(2_000, DEFAULT_TREE_SEED);
        train_tree(&corpus, TreeParams::default()).expect("synthetic corpus is well formed")
    })
}
