//! Feature encoding of column profiles and a synthetic training corpus for
//! the groupby predictor.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stats::{profile_column, ColumnProfile};
use super::tree::Sample;
use crate::table::{Cell, Column, ColumnType};

/// Bumped whenever [`FEATURE_NAMES`] changes; stored in model files.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

pub const FEATURE_NAMES: [&str; 9] = [
    "is_integer",
    "is_float",
    "is_string",
    "is_datetime",
    "position",
    "missing_fraction",
    "cardinality_fraction",
    "peak_frequency",
    "entropy",
];

pub fn feature_vector(p: &ColumnProfile, row_count: usize) -> Vec<f64> {
    let n = row_count.max(1) as f64;
    let one_hot = |t: ColumnType| f64::from(u8::from(p.dtype == t));
    vec![
        one_hot(ColumnType::Integer),
        one_hot(ColumnType::Float),
        one_hot(ColumnType::String),
        one_hot(ColumnType::DateTime),
        p.position as f64,
        p.missing_count as f64 / n,
        p.cardinality as f64 / n,
        p.peak_frequency,
        p.entropy,
    ]
}

/// Labelling rule of the synthetic corpus: a string column with at least
/// two distinct values, at most half as many distinct values as rows.
pub fn synthetic_groupby_label(col: &Column) -> u8 {
    if col.declared_type != ColumnType::String {
        return 0;
    }
    let distinct: HashSet<&Cell> = col.cells.iter().filter(|c| !c.is_null()).collect();
    u8::from(distinct.len() >= 2 && 2 * distinct.len() <= col.len())
}

/// A generated column with its position in a notional table and label.
#[derive(Debug, Clone)]
pub struct SyntheticColumn {
    pub column: Column,
    pub position: usize,
    pub label: u8,
}

pub fn synthetic_groupby_columns(n: usize, seed: u64) -> Vec<SyntheticColumn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let rows = rng.random_range(10..120usize);
            let dtype = match rng.random_range(0..5u8) {
                0 => ColumnType::Integer,
                1 => ColumnType::Float,
                2 => ColumnType::DateTime,
                _ => ColumnType::String,
            };
            // Distinct-value budget: low, medium or near-unique.
            let distinct = match rng.random_range(0..3u8) {
                0 => rng.random_range(1..=5usize),
                1 => rng.random_range(2..=rows / 2 + 1),
                _ => rng.random_range(rows * 3 / 4..=rows),
            }
            .max(1);
            let null_rate = if rng.random_bool(0.3) { rng.random_range(0.0..0.2) } else { 0.0 };
            let cells = (0..rows)
                .map(|_| {
                    if rng.random_bool(null_rate) {
                        return Cell::Null;
                    }
                    let k = rng.random_range(0..distinct) as i64;
                    match dtype {
                        ColumnType::Integer => Cell::Int(k * 7 + 3),
                        ColumnType::Float => Cell::Float(k as f64 * 1.25 + 0.5),
                        ColumnType::DateTime => Cell::DateTime(
                            chrono::NaiveDate::from_ymd_opt(2000, 1, 1)
                                .unwrap()
                                .and_hms_opt(0, 0, 0)
                                .unwrap()
                                + chrono::Duration::days(k),
                        ),
                        ColumnType::String => Cell::Str(format!("v{k}")),
                    }
                })
                .collect();
            let column = Column::new(format!("c{i}"), dtype, cells);
            let label = synthetic_groupby_label(&column);
            SyntheticColumn {
                column,
                position: rng.random_range(0..12),
                label,
            }
        })
        .collect()
}

pub fn synthetic_groupby_corpus(n: usize, seed: u64) -> Vec<Sample> {
    synthetic_groupby_columns(n, seed)
        .into_iter()
        .map(|s| {
            let rows = s.column.len();
            let p = profile_column(&s.column, s.position, rows).expect("synthetic columns are non-empty");
            (feature_vector(&p, rows), s.label)
        })
        .collect()
}
