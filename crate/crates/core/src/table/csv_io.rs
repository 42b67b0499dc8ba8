use std::borrow::Cow;

use super::{Cell, Column, ColumnType, Table, TableError};

pub const DEFAULT_MAX_ROWS: usize = 100_000;

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub max_rows: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
            max_rows: DEFAULT_MAX_ROWS,
        }
    }
}

/// Text is UTF-8 (optional BOM) or, failing that, Latin-1. NUL bytes mark
/// binary input and are rejected.
fn decode(bytes: &[u8]) -> Result<Cow<'_, str>, TableError> {
    if let Some(pos) = bytes.iter().position(|&b| b == 0) {
        return Err(TableError::DecodeError(format!("NUL byte at offset {pos}")));
    }
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    match std::str::from_utf8(bytes) {
        Ok(s) => Ok(Cow::Borrowed(s)),
        Err(_) => Ok(Cow::Owned(bytes.iter().map(|&b| b as char).collect())),
    }
}

/// Parses RFC-4180 CSV into an untyped table: every cell is `Str`, or `Null`
/// for empty fields. Short rows are padded with `Null`, long rows truncated.
pub fn parse_csv(bytes: &[u8], opts: CsvOptions) -> Result<Table, TableError> {
    let text = decode(bytes)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let header: Vec<String> = if opts.has_header {
        match records.next() {
            Some(r) => r
                .map_err(|e| TableError::Csv(e.to_string()))?
                .iter()
                .map(|s| s.trim().to_string())
                .collect(),
            None => return Err(TableError::EmptyInput),
        }
    } else {
        Vec::new()
    };

    let mut truncated = false;
    for rec in records {
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        if rows.len() == opts.max_rows {
            truncated = true;
            break;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if truncated {
        log::warn!("csv input truncated to {} rows", opts.max_rows);
    }

    let width = if opts.has_header {
        header.len()
    } else {
        rows.iter().map(Vec::len).max().unwrap_or(0)
    };
    if width == 0 || rows.is_empty() {
        return Err(TableError::EmptyInput);
    }

    let names: Vec<String> = if opts.has_header {
        header
            .into_iter()
            .enumerate()
            .map(|(i, h)| if h.is_empty() { format!("column_{i}") } else { h })
            .collect()
    } else {
        (0..width).map(|i| format!("column_{i}")).collect()
    };

    let columns = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let cells = rows
                .iter()
                .map(|r| match r.get(j).map(String::as_str) {
                    None | Some("") => Cell::Null,
                    Some(s) => Cell::Str(s.to_string()),
                })
                .collect();
            Column::new(name, ColumnType::String, cells)
        })
        .collect();
    Table::new(columns)
}

/// Writes a header row and one row per table row; `Null` becomes an empty
/// field.
pub fn serialize_csv(t: &Table) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(t.column_names()).expect("in-memory write");
    for i in 0..t.row_count() {
        w.write_record(t.row(i).iter().map(|c| c.render()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
