//! Question/code alignment: embeddings, labelled pair datasets with swap
//! augmentation, a small fully connected classifier in three input
//! variants, and a chat-model judge for comparison.

mod data;
mod embed;
mod judge;
mod model;
pub mod planted;
mod train;

use thiserror::Error;

use crate::genpipe::GenError;

pub use data::{read_pairs_jsonl, swap_augment, train_test_split, write_pairs_jsonl, Label, LabeledPair, Origin, SwapScheme};
pub use embed::{
    cosine, CachedEmbeddings, EmbeddingProvider, EmbeddingVector, LookupEmbeddingProvider, MockEmbeddingProvider,
    OpenAiEmbeddingProvider,
};
pub use judge::{judge_prompt, llm_judge, parse_verdict, JUDGE_SYSTEM};
pub use model::{Activation, AlignmentModel, Dense, ModelShape, Variant, MODEL_FORMAT_VERSION};
pub use train::{
    bce_loss, embed_pairs, evaluate_f1, gradient_check, gradient_check_probes, score, score_texts, train, train_embedded,
    Example, TrainConfig, TrainReport,
};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("text to embed is empty")]
    EmptyText,
    #[error("dataset holds a single class")]
    SingleClassDataset,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("judge verdict not recognised: {0:?}")]
    UnparseableVerdict(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Endpoint(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
