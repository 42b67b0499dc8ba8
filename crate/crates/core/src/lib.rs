//! Automated insight generation over tabular data.
//!
//! The pipeline profiles a table, asks a chat model for `(question, code)`
//! pairs, executes each code snippet through a restricted table-query
//! language, and scores how well question and code agree with an
//! embedding-based classifier. The [`metrics`] and [`harness`] modules
//! cover evaluation and run bookkeeping.

pub mod alignment;
pub mod dsl;
pub mod fixtures;
pub mod genpipe;
pub mod harness;
pub mod metrics;
pub mod profile;
pub mod table;

pub use table::{Cell, Column, ColumnType, Table, TableError};
