//! Table data model: typed cells, columns and rectangular tables.
//!
//! Ingested tables start out untyped (every cell is `Str` or `Null`);
//! [`Table::infer_types`] refines each column to one of the four column
//! types afterwards.

mod csv_io;
mod infer;
mod json;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_csv, serialize_csv, CsvOptions, DEFAULT_MAX_ROWS};
pub use infer::{coerce, coerce_cell, infer_column_type, parse_datetime};
pub(crate) use infer::{parse_float, parse_int};

/// Rendering used for `DateTime` cells everywhere (ISO-8601, second resolution).
pub const DATETIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("input has no rows or no columns")]
    EmptyInput,
    #[error("input bytes are not decodable text: {0}")]
    DecodeError(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("column `{name}` has {len} cells, table has {rows} rows")]
    NotRectangular {
        name: String,
        len: usize,
        rows: usize,
    },
    #[error("invalid table json: {0}")]
    Json(String),
}

/// A single table cell.
///
/// `Float` never holds NaN or an infinity; constructors that parse text
/// reject non-finite values.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Int(i64),
    Float(f64),
    Str(String),
    DateTime(NaiveDateTime),
}

impl Cell {
    pub fn is_null(&self) -> bool {
        matches!(self, Cell::Null)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Cell::Int(_) | Cell::Float(_))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// Builds a float cell, mapping non-finite values to `Null`.
    pub fn float(v: f64) -> Cell {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Null
        }
    }

    /// Text rendering used by CSV output, prompts and result strings.
    /// `Null` renders as the empty string.
    pub fn render(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => render_float(*v),
            Cell::Str(s) => s.clone(),
            Cell::DateTime(dt) => dt.format(DATETIME_FORMAT).to_string(),
        }
    }

    /// Total order used for sorting and group keys. Numbers compare
    /// numerically across `Int`/`Float`; otherwise numbers < datetimes <
    /// strings, and `Null` sorts last.
    pub fn total_cmp(&self, other: &Cell) -> Ordering {
        fn rank(c: &Cell) -> u8 {
            match c {
                Cell::Int(_) | Cell::Float(_) => 0,
                Cell::DateTime(_) => 1,
                Cell::Str(_) => 2,
                Cell::Null => 3,
            }
        }
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (a, b) if a.is_numeric() && b.is_numeric() => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                x.total_cmp(&y)
            }
            (Cell::DateTime(a), Cell::DateTime(b)) => a.cmp(b),
            (Cell::Str(a), Cell::Str(b)) => a.cmp(b),
            (a, b) => rank(a).cmp(&rank(b)),
        }
    }
}

/// Floats render with Rust's shortest round-trip form, keeping a trailing
/// `.0` on integral values so they stay distinguishable from integers.
pub fn render_float(v: f64) -> String {
    let s = v.to_string();
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

impl Eq for Cell {}

impl Hash for Cell {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Cell::Null => {}
            Cell::Int(v) => v.hash(state),
            // -0.0 == 0.0, so both must hash alike.
            Cell::Float(v) => (if *v == 0.0 { 0.0f64 } else { *v }).to_bits().hash(state),
            Cell::Str(s) => s.hash(state),
            Cell::DateTime(dt) => dt.hash(state),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Float,
    String,
    DateTime,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Integer | ColumnType::Float)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Integer => "integer",
            ColumnType::Float => "float",
            ColumnType::String => "string",
            ColumnType::DateTime => "datetime",
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub declared_type: ColumnType,
    pub cells: Vec<Cell>,
}

impl Column {
    pub fn new(name: impl Into<String>, declared_type: ColumnType, cells: Vec<Cell>) -> Self {
        Column {
            name: name.into(),
            declared_type,
            cells,
        }
    }

    /// An untyped column of `Str` cells; empty strings become `Null`.
    pub fn from_strs<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        let cells = values
            .iter()
            .map(|v| match v.as_ref() {
                "" => Cell::Null,
                s => Cell::Str(s.to_string()),
            })
            .collect();
        Column::new(name, ColumnType::String, cells)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_null()).count()
    }
}

/// A rectangular table. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<Column>,
    row_count: usize,
}

impl Table {
    /// Builds a table, deduplicating column names and checking that every
    /// column has the same length.
    pub fn new(mut columns: Vec<Column>) -> Result<Self, TableError> {
        let row_count = columns.first().map(Column::len).unwrap_or(0);
        if let Some(bad) = columns.iter().find(|c| c.len() != row_count) {
            return Err(TableError::NotRectangular {
                name: bad.name.clone(),
                len: bad.len(),
                rows: row_count,
            });
        }
        let names = dedup_names(columns.iter().map(|c| c.name.clone()).collect());
        for (col, name) in columns.iter_mut().zip(names) {
            col.name = name;
        }
        Ok(Table { columns, row_count })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<&Cell> {
        self.columns.iter().map(|c| &c.cells[i]).collect()
    }

    /// Infers each column's type from its text rendering and coerces it.
    pub fn infer_types(&self) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|col| {
                let raw: Vec<Option<String>> = col
                    .cells
                    .iter()
                    .map(|c| (!c.is_null()).then(|| c.render()))
                    .collect();
                let raw_refs: Vec<Option<&str>> = raw.iter().map(|r| r.as_deref()).collect();
                let ty = if raw_refs.is_empty() {
                    ColumnType::String
                } else {
                    infer_column_type(&raw_refs)
                };
                coerce(col, ty)
            })
            .collect();
        Table {
            columns,
            row_count: self.row_count,
        }
    }

    /// Keeps the rows at `indices`, in the given order.
    pub fn take_rows(&self, indices: &[usize]) -> Table {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                declared_type: c.declared_type,
                cells: indices.iter().map(|&i| c.cells[i].clone()).collect(),
            })
            .collect();
        Table {
            columns,
            row_count: indices.len(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json::table_to_json(self)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Table, TableError> {
        json::table_from_json(value)
    }
}

/// Returns `min(k, row_count)` rows. Row 0 is always kept; the remaining
/// rows are a seeded draw, emitted in their original order.
pub fn sample_rows(t: &Table, k: usize, seed: u64) -> Table {
    let n = t.row_count();
    let k = k.max(1).min(n);
    if k == n {
        return t.clone();
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rest.shuffle(&mut rng);
    let mut picked: Vec<usize> = std::iter::once(0).chain(rest.into_iter().take(k - 1)).collect();
    picked.sort_unstable();
    t.take_rows(&picked)
}

/// Renames duplicates to `name_1`, `name_2`, ... skipping suffixes that
/// are already taken by other columns.
fn dedup_names(names: Vec<String>) -> Vec<String> {
    use std::collections::HashSet;
    let mut taken: HashSet<String> = HashSet::new();
    let originals: HashSet<&String> = names.iter().collect();
    let mut out = Vec::with_capacity(names.len());
    for name in &names {
        if taken.insert(name.clone()) {
            out.push(name.clone());
            continue;
        }
        let mut k = 1;
        loop {
            let candidate = format!("{name}_{k}");
            if !originals.contains(&candidate) && taken.insert(candidate.clone()) {
                out.push(candidate);
                break;
            }
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_get_suffixes() {
        let t = Table::new(vec![
            Column::from_strs("a", &["1"]),
            Column::from_strs("a", &["2"]),
            Column::from_strs("a_1", &["3"]),
        ])
        .unwrap();
        assert_eq!(t.column_names(), vec!["a", "a_2", "a_1"]);
    }

    #[test]
    fn ragged_columns_rejected() {
        let err = Table::new(vec![
            Column::from_strs("a", &["1", "2"]),
            Column::from_strs("b", &["1"]),
        ])
        .unwrap_err();
        assert!(matches!(err, TableError::NotRectangular { .. }));
    }

    #[test]
    fn total_order_mixes_ints_and_floats() {
        assert_eq!(Cell::Int(2).total_cmp(&Cell::Float(1.5)), Ordering::Greater);
        assert_eq!(Cell::Null.total_cmp(&Cell::Int(0)), Ordering::Greater);
        assert_eq!(
            Cell::Str("a".into()).total_cmp(&Cell::Str("b".into())),
            Ordering::Less
        );
    }

    #[test]
    fn float_rendering_keeps_decimal_point() {
        assert_eq!(render_float(18.0), "18.0");
        assert_eq!(render_float(0.25), "0.25");
        assert_eq!(Cell::float(f64::NAN), Cell::Null);
    }

    #[test]
    fn sample_keeps_first_row() {
        let t = Table::new(vec![Column::from_strs("a", &["x", "y", "z", "w"])]).unwrap();
        let s = sample_rows(&t, 1, 99);
        assert_eq!(s.row_count(), 1);
        assert_eq!(s.columns()[0].cells[0], Cell::Str("x".into()));
        assert_eq!(sample_rows(&t, 10, 1), t);
    }
}
