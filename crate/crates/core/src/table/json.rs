use serde_json::{json, Value};

use super::{coerce_cell, parse_datetime, Cell, Column, ColumnType, Table, TableError};

fn cell_to_json(c: &Cell) -> Value {
    match c {
        Cell::Null => Value::Null,
        Cell::Int(v) => json!(v),
        Cell::Float(v) => json!(v),
        Cell::Str(s) => json!(s),
        Cell::DateTime(_) => json!(c.render()),
    }
}

fn cell_from_json(v: &Value, ty: ColumnType) -> Result<Cell, TableError> {
    let cell = match (ty, v) {
        (_, Value::Null) => Cell::Null,
        (ColumnType::Integer, Value::Number(n)) => n
            .as_i64()
            .map(Cell::Int)
            .ok_or_else(|| TableError::Json(format!("{n} is not an integer")))?,
        (ColumnType::Float, Value::Number(n)) => Cell::float(n.as_f64().unwrap_or(f64::NAN)),
        (ColumnType::String, Value::String(s)) => Cell::Str(s.clone()),
        (ColumnType::DateTime, Value::String(s)) => parse_datetime(s)
            .map(Cell::DateTime)
            .ok_or_else(|| TableError::Json(format!("bad datetime {s:?}")))?,
        (ty, Value::String(s)) => coerce_cell(&Cell::Str(s.clone()), ty),
        (ty, other) => return Err(TableError::Json(format!("{other} is not a {ty} cell"))),
    };
    Ok(cell)
}

/// `{columns: [{name, type, cells: [...]}]}`.
pub(super) fn table_to_json(t: &Table) -> Value {
    let columns: Vec<Value> = t
        .columns()
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "type": c.declared_type,
                "cells": c.cells.iter().map(cell_to_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "columns": columns })
}

pub(super) fn table_from_json(v: &Value) -> Result<Table, TableError> {
    let cols = v
        .get("columns")
        .and_then(Value::as_array)
        .ok_or_else(|| TableError::Json("missing `columns` array".into()))?;
    let mut columns = Vec::with_capacity(cols.len());
    for c in cols {
        let name = c
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| TableError::Json("column without name".into()))?;
        let ty: ColumnType = serde_json::from_value(c.get("type").cloned().unwrap_or(Value::Null))
            .map_err(|e| TableError::Json(e.to_string()))?;
        let cells = c
            .get("cells")
            .and_then(Value::as_array)
            .ok_or_else(|| TableError::Json(format!("column {name} has no cells")))?
            .iter()
            .map(|v| cell_from_json(v, ty))
            .collect::<Result<Vec<_>, _>>()?;
        columns.push(Column::new(name, ty, cells));
    }
    Table::new(columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{parse_csv, CsvOptions};

    #[test]
    fn typed_table_round_trips() {
        let t = parse_csv(
            b"n,x,s,d\n1,1.5,a,2020-01-02\n,2,b,\n",
            CsvOptions::default(),
        )
        .unwrap()
        .infer_types();
        let v = t.to_json();
        assert_eq!(v["columns"][3]["cells"][0], "2020-01-02T00:00:00");
        assert_eq!(v["columns"][0]["cells"][1], Value::Null);
        assert_eq!(v["columns"][1]["type"], "float");
        assert_eq!(Table::from_json(&v).unwrap(), t);
    }
}
