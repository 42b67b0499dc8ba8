use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ProfileError;
use crate::table::{Cell, Column, ColumnType, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub dtype: ColumnType,
    pub position: usize,
    pub missing_count: usize,
    /// Distinct non-null values.
    pub cardinality: usize,
    /// `(min, max)` rendered as text; `None` for string columns and for
    /// numeric/datetime columns without a single non-null value.
    pub extrema: Option<(String, String)>,
    pub peak_frequency: f64,
    /// Shannon entropy in bits.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub table_id: String,
    pub row_count: usize,
    pub column_profiles: Vec<ColumnProfile>,
}

impl TableProfile {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.column_profiles.iter().find(|c| c.name == name)
    }
}

fn frequencies(cells: &[Cell]) -> HashMap<&Cell, usize> {
    let mut counts: HashMap<&Cell, usize> = HashMap::new();
    for c in cells {
        *counts.entry(c).or_default() += 1;
    }
    counts
}

/// Shannon entropy (base 2) of the value distribution. `Null` counts as one
/// additional symbol.
pub fn entropy(col: &Column) -> Result<f64, ProfileError> {
    if col.is_empty() {
        return Err(ProfileError::EmptyColumn(col.name.clone()));
    }
    let n = col.len() as f64;
    let h: f64 = frequencies(&col.cells)
        .values()
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum();
    // Constant columns produce -0.0 through the sum.
    Ok(h.max(0.0))
}

pub fn profile_column(col: &Column, position: usize, row_count: usize) -> Result<ColumnProfile, ProfileError> {
    if col.is_empty() || row_count == 0 {
        return Err(ProfileError::EmptyColumn(col.name.clone()));
    }
    debug_assert_eq!(col.len(), row_count);
    let missing_count = col.missing_count();
    let freqs = frequencies(&col.cells);
    let cardinality = freqs.keys().filter(|c| !c.is_null()).count();
    let peak = freqs
        .iter()
        .filter(|(c, _)| !c.is_null())
        .map(|(_, &k)| k)
        .max()
        .unwrap_or(0);
    let extrema = match col.declared_type {
        ColumnType::Integer | ColumnType::Float | ColumnType::DateTime => {
            let mut non_null = col.cells.iter().filter(|c| !c.is_null());
            non_null.next().map(|first| {
                let (lo, hi) = col.cells.iter().filter(|c| !c.is_null()).fold((first, first), |(lo, hi), c| {
                    (
                        if c.total_cmp(lo).is_lt() { c } else { lo },
                        if c.total_cmp(hi).is_gt() { c } else { hi },
                    )
                });
                (lo.render(), hi.render())
            })
        }
        ColumnType::String => None,
    };
    Ok(ColumnProfile {
        name: col.name.clone(),
        dtype: col.declared_type,
        position,
        missing_count,
        cardinality,
        extrema,
        peak_frequency: peak as f64 / row_count as f64,
        entropy: entropy(col)?,
    })
}

/// Profiles every column of a typed table, in parallel.
pub fn profile_table(table_id: &str, t: &Table) -> Result<TableProfile, ProfileError> {
    use rayon::prelude::*;
    let column_profiles = t
        .columns()
        .par_iter()
        .enumerate()
        .map(|(i, c)| profile_column(c, i, t.row_count()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TableProfile {
        table_id: table_id.to_string(),
        row_count: t.row_count(),
        column_profiles,
    })
}
