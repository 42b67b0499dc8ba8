use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::profile::TableProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    pub index: usize,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IndexSeries {
    pub points: Vec<IndexPoint>,
}

/// Per-index mean and count, indices ascending.
pub fn series_by_index(items: &[(usize, f64)]) -> IndexSeries {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for &(i, v) in items {
        let e = acc.entry(i).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    IndexSeries {
        points: acc
            .into_iter()
            .map(|(index, (sum, count))| IndexPoint {
                index,
                mean: sum / count as f64,
                count,
            })
            .collect(),
    }
}

pub fn index_series_to_csv(s: &IndexSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "mean", "count"]).expect("in-memory write");
    for p in &s.points {
        w.write_record([p.index.to_string(), p.mean.to_string(), p.count.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub label: String,
    pub table_ids: Vec<String>,
}

/// Labels for the half-open column-count buckets `[e_i, e_{i+1})`, like
/// `T(4-8)`, with an underflow bucket first and an overflow bucket last.
pub fn bucket_labels(edges: &[usize]) -> Result<Vec<String>, MetricsError> {
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::BadEdges);
    }
    let mut labels = vec![format!("T(<{})", edges[0])];
    labels.extend(edges.windows(2).map(|w| format!("T({}-{})", w[0], w[1] - 1)));
    labels.push(format!("T({}+)", edges[edges.len() - 1]));
    Ok(labels)
}

/// Position of a `columns`-wide table among [`bucket_labels`].
pub fn bucket_slot(columns: usize, edges: &[usize]) -> usize {
    edges.iter().take_while(|&&e| e <= columns).count()
}

pub fn bucket_by_column_count(tables: &[TableProfile], edges: &[usize]) -> Result<Vec<Bucket>, MetricsError> {
    let mut buckets: Vec<Bucket> = bucket_labels(edges)?
        .into_iter()
        .map(|label| Bucket {
            label,
            table_ids: Vec::new(),
        })
        .collect();
    for t in tables {
        buckets[bucket_slot(t.column_profiles.len(), edges)].table_ids.push(t.table_id.clone());
    }
    Ok(buckets)
}

pub fn buckets_to_csv(buckets: &[Bucket]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bucket", "tables", "table_ids"]).expect("in-memory write");
    for b in buckets {
        w.write_record([b.label.clone(), b.table_ids.len().to_string(), b.table_ids.join(";")])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
