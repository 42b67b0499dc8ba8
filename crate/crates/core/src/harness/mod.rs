//! Reproducible runs: configuration, per-table pipeline execution, JSONL
//! persistence, annotation worksheets and evaluation reports.

mod annotate;
mod config;
mod eval;
mod records;
mod run;
pub mod svg;

use thiserror::Error;

use crate::alignment::AlignError;
use crate::genpipe::GenError;
use crate::metrics::MetricsError;
use crate::profile::ProfileError;
use crate::table::TableError;

pub use annotate::{annotate, import_worksheet, read_worksheet, write_worksheet, WorksheetRow};
pub use config::{
    ClassifierConfig, Config, EndpointConfig, GenerationConfig, ModelConfig, ReportConfig, RunConfig, ShotsSetting,
};
pub use eval::{eval_records, read_report, run_eval, EvalOptions, EvalWhich, CONFUSION_HEADER};
pub use records::{
    read_annotations, read_manifest, read_records, write_annotations, write_manifest, write_records, Annotation, Counts,
    InsightRecord, RecordStatus, RunManifest, TableFailure, TableRef, RECORD_SCHEMA_VERSION,
};
pub use run::{
    judge_records, load_run_tables, pairs_from_records, refilter_records, rescore_records, run_pipeline, store_records, RunOutput, Services,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("no records to evaluate")]
    EmptyRecords,
    #[error("record schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("asked for {requested} records, only {available} available")]
    InsufficientRecords { requested: usize, available: usize },
    #[error("worksheet row {row}: unrecognised label {value:?}")]
    BadLabel { row: usize, value: String },
    #[error("run bookkeeping is inconsistent: {0}")]
    Invariant(String),
    #[error("{path}: {source}")]
    Table { path: String, source: TableError },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Alignment(#[from] AlignError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
