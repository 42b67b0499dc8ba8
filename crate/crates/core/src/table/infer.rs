use chrono::{NaiveDate, NaiveDateTime};

use super::{Cell, Column, ColumnType};

/// Share of non-null values that must parse as dates for a column to be
/// typed `DateTime`.
const DATETIME_THRESHOLD: f64 = 0.95;

const DATETIME_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
];

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%d/%m/%Y", "%B %d, %Y", "%b %d, %Y"];

pub(crate) fn parse_int(s: &str) -> Option<i64> {
    s.trim().parse::<i64>().ok()
}

pub(crate) fn parse_float(s: &str) -> Option<f64> {
    let t = s.trim();
    // Rust accepts "inf"/"nan" spellings; those are text here, not numbers.
    if t.is_empty() || t.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses the accepted date/datetime spellings at second resolution.
/// A trailing `Z` on ISO datetimes is accepted and dropped.
pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let t = s.trim();
    let t = t.strip_suffix('Z').unwrap_or(t);
    for f in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, f) {
            return dt.with_nanosecond_zero();
        }
    }
    for f in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(t, f) {
            return d.and_hms_opt(0, 0, 0);
        }
    }
    None
}

trait TruncateSubsec {
    fn with_nanosecond_zero(self) -> Option<NaiveDateTime>;
}

impl TruncateSubsec for NaiveDateTime {
    fn with_nanosecond_zero(self) -> Option<NaiveDateTime> {
        use chrono::Timelike;
        self.with_nanosecond(0)
    }
}

/// Integer if every non-null parses as an integer, else Float if every
/// non-null parses as a decimal, else DateTime if at least 95% parse as
/// dates, else String. All-null input is String.
pub fn infer_column_type(raw: &[Option<&str>]) -> ColumnType {
    let values: Vec<&str> = raw.iter().flatten().copied().collect();
    if values.is_empty() {
        return ColumnType::String;
    }
    if values.iter().all(|v| parse_int(v).is_some()) {
        return ColumnType::Integer;
    }
    if values.iter().all(|v| parse_float(v).is_some()) {
        return ColumnType::Float;
    }
    let dates = values.iter().filter(|v| parse_datetime(v).is_some()).count();
    if dates as f64 >= DATETIME_THRESHOLD * values.len() as f64 {
        return ColumnType::DateTime;
    }
    ColumnType::String
}

/// Converts one cell to `ty`; anything that does not convert becomes `Null`.
pub fn coerce_cell(cell: &Cell, ty: ColumnType) -> Cell {
    match (ty, cell) {
        (_, Cell::Null) => Cell::Null,
        (ColumnType::String, Cell::Str(s)) => Cell::Str(s.clone()),
        (ColumnType::String, other) => Cell::Str(other.render()),
        (ColumnType::Integer, Cell::Int(v)) => Cell::Int(*v),
        (ColumnType::Integer, Cell::Float(v)) => {
            if v.fract() == 0.0 && v.abs() < 9.0e15 {
                Cell::Int(*v as i64)
            } else {
                Cell::Null
            }
        }
        (ColumnType::Integer, Cell::Str(s)) => parse_int(s).map_or(Cell::Null, Cell::Int),
        (ColumnType::Float, Cell::Int(v)) => Cell::Float(*v as f64),
        (ColumnType::Float, Cell::Float(v)) => Cell::Float(*v),
        (ColumnType::Float, Cell::Str(s)) => parse_float(s).map_or(Cell::Null, Cell::Float),
        (ColumnType::DateTime, Cell::DateTime(dt)) => Cell::DateTime(*dt),
        (ColumnType::DateTime, Cell::Str(s)) => parse_datetime(s).map_or(Cell::Null, Cell::DateTime),
        _ => Cell::Null,
    }
}

pub fn coerce(column: &Column, ty: ColumnType) -> Column {
    Column {
        name: column.name.clone(),
        declared_type: ty,
        cells: column.cells.iter().map(|c| coerce_cell(c, ty)).collect(),
    }
}
