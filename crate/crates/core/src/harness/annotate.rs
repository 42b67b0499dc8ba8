use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::{Annotation, InsightRecord, RecordStatus};
use super::HarnessError;
use crate::alignment::Label;

/// One row of an annotation worksheet. `label` is left blank for the
/// annotator to fill in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorksheetRow {
    pub run_id: String,
    pub table_id: String,
    pub index: usize,
    pub stratum: usize,
    pub code_length: usize,
    pub question: String,
    pub code: String,
    pub result: String,
    pub label: String,
}

/// Draw sizes for `strata` strata: an equal share each, with the remainder
/// going to the last (longest-code) stratum.
fn equal_split(total: usize, strata: usize) -> Vec<usize> {
    let mut out = vec![total / strata; strata];
    out[strata - 1] += total % strata;
    out
}

/// Stratified sample of executable records for labelling. Records are
/// ordered by masked-code length and cut into `strata` contiguous groups of
/// near-equal size; each group contributes an equal share of the sample.
/// A group too small for its share passes the shortfall to the groups with
/// longer code first.
pub fn annotate(
    records: &[InsightRecord],
    sample_size: usize,
    strata: usize,
    seed: u64,
) -> Result<Vec<WorksheetRow>, HarnessError> {
    if strata == 0 {
        return Err(HarnessError::Config("strata must be at least 1".into()));
    }
    let mut eligible: Vec<&InsightRecord> = records.iter().filter(|r| r.status == RecordStatus::Executable).collect();
    if sample_size > eligible.len() {
        return Err(HarnessError::InsufficientRecords {
            requested: sample_size,
            available: eligible.len(),
        });
    }
    let len = |r: &InsightRecord| r.masked_code.chars().count();
    eligible.sort_by(|a, b| (len(a), a.key()).cmp(&(len(b), b.key())));
    let strata = strata.min(eligible.len().max(1));

    let sizes = equal_split(eligible.len(), strata);
    let mut quota = equal_split(sample_size, strata);
    let mut spare = 0;
    for (q, size) in quota.iter_mut().zip(&sizes) {
        if *q > *size {
            spare += *q - *size;
            *q = *size;
        }
    }
    for (q, size) in quota.iter_mut().zip(&sizes).rev() {
        let take = spare.min(size - *q);
        *q += take;
        spare -= take;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sample_size);
    let mut start = 0;
    for (s, (&size, &q)) in sizes.iter().zip(&quota).enumerate() {
        let mut group: Vec<&InsightRecord> = eligible[start..start + size].to_vec();
        start += size;
        group.shuffle(&mut rng);
        let mut picked: Vec<&InsightRecord> = group.into_iter().take(q).collect();
        picked.sort_by(|a, b| a.key().cmp(&b.key()));
        out.extend(picked.into_iter().map(|r| WorksheetRow {
            run_id: r.run_id.clone(),
            table_id: r.table_id.clone(),
            index: r.index,
            stratum: s,
            code_length: len(r),
            question: r.question.clone(),
            code: r.code.clone(),
            result: r.result_rendering.clone().unwrap_or_default(),
            label: String::new(),
        }));
    }
    Ok(out)
}

pub fn write_worksheet(path: &Path, rows: &[WorksheetRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_worksheet(path: &Path) -> Result<Vec<WorksheetRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn parse_label(s: &str) -> Option<Label> {
    match s.trim().to_ascii_lowercase().as_str() {
        "aligned" | "1" | "yes" | "y" | "true" => Some(Label::Aligned),
        "misaligned" | "0" | "no" | "n" | "false" => Some(Label::Misaligned),
        _ => None,
    }
}

/// Turns a filled-in worksheet into annotations. Rows left blank are
/// skipped.
pub fn import_worksheet(path: &Path, annotator: &str) -> Result<Vec<Annotation>, HarnessError> {
    let mut out = Vec::new();
    for (i, row) in read_worksheet(path)?.into_iter().enumerate() {
        if row.label.trim().is_empty() {
            continue;
        }
        let label = parse_label(&row.label).ok_or_else(|| HarnessError::BadLabel {
            row: i + 1,
            value: row.label.clone(),
        })?;
        out.push(Annotation {
            run_id: row.run_id,
            table_id: row.table_id,
            index: row.index,
            annotator: annotator.to_string(),
            label,
        });
    }
    Ok(out)
}
