use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ShotsSetting;
use super::HarnessError;
use crate::alignment::Label;
use crate::dsl::ErrorKind;
use crate::genpipe::{ExchangeKind, GenerationStyle, Usage};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Pending,
    Executable,
    NonExecutable,
}

/// One generated insight as persisted, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub table_id: String,
    pub table_columns: usize,
    pub style: GenerationStyle,
    pub shots: ShotsSetting,
    pub index: usize,
    pub question: String,
    pub code: String,
    pub status: RecordStatus,
    pub result_rendering: Option<String>,
    pub error_kind: Option<ErrorKind>,
    /// Present only for executable records that were scored.
    pub alignment_score: Option<f64>,
    /// Code with literals and whitespace removed; the raw code when it
    /// does not lex.
    pub masked_code: String,
    pub usage: Usage,
}

impl InsightRecord {
    pub fn key(&self) -> (&str, &str, usize) {
        (&self.run_id, &self.table_id, self.index)
    }
}

/// A label attached to a record by some annotator (`human`, `judge`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub run_id: String,
    pub table_id: String,
    pub index: usize,
    pub annotator: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub generated: usize,
    pub executable: usize,
    pub non_executable: usize,
    pub aligned: usize,
    pub misaligned: usize,
}

impl Counts {
    pub fn from_records(records: &[InsightRecord], threshold: f64) -> Counts {
        let mut c = Counts {
            generated: records.len(),
            ..Counts::default()
        };
        for r in records {
            match r.status {
                RecordStatus::Executable => {
                    c.executable += 1;
                    match r.alignment_score {
                        Some(s) if s >= threshold => c.aligned += 1,
                        Some(_) => c.misaligned += 1,
                        None => {}
                    }
                }
                RecordStatus::NonExecutable => c.non_executable += 1,
                RecordStatus::Pending => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRef {
    pub table_id: String,
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableFailure {
    pub table_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub created_at: String,
    pub config_hash: String,
    pub seed: u64,
    pub mock: bool,
    pub table_ids: Vec<String>,
    pub tables: Vec<TableRef>,
    pub style: GenerationStyle,
    pub shots: ShotsSetting,
    pub n_insights: usize,
    pub threshold: f64,
    pub counts: Counts,
    pub usage_totals: Usage,
    pub usage_generate: Usage,
    pub usage_translate: Usage,
    pub calls: Vec<(ExchangeKind, usize)>,
    /// Entries the completion parser discarded.
    pub dropped: usize,
    /// Tables that came back with fewer insights than requested.
    pub truncated_tables: Vec<String>,
    pub failures: Vec<TableFailure>,
}

impl RunManifest {
    pub fn check(&self) -> Result<(), HarnessError> {
        let c = &self.counts;
        if c.generated != c.executable + c.non_executable {
            return Err(HarnessError::Invariant(format!(
                "generated {} != executable {} + non-executable {}",
                c.generated, c.executable, c.non_executable
            )));
        }
        if c.aligned + c.misaligned > c.executable {
            return Err(HarnessError::Invariant(format!(
                "aligned {} + misaligned {} exceeds executable {}",
                c.aligned, c.misaligned, c.executable
            )));
        }
        Ok(())
    }
}

fn append_lines<T: Serialize>(path: &Path, items: &[T], truncate: bool) -> Result<(), HarnessError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(!truncate)
        .write(true)
        .truncate(truncate)
        .open(path)?;
    for item in items {
        let mut line = serde_json::to_string(item)?;
        line.push('\n');
        // one write per record so a crash leaves whole lines behind
        f.write_all(line.as_bytes())?;
    }
    f.sync_data()?;
    Ok(())
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Replaces the file's contents with `records`.
pub fn write_records(path: &Path, records: &[InsightRecord]) -> Result<(), HarnessError> {
    append_lines(path, records, true)
}

pub fn read_records(path: &Path) -> Result<Vec<InsightRecord>, HarnessError> {
    let records: Vec<InsightRecord> = read_lines(path)?;
    if let Some(r) = records.iter().find(|r| r.schema_version != RECORD_SCHEMA_VERSION) {
        return Err(HarnessError::SchemaVersionMismatch {
            found: r.schema_version,
            expected: RECORD_SCHEMA_VERSION,
        });
    }
    Ok(records)
}

pub fn write_annotations(path: &Path, items: &[Annotation]) -> Result<(), HarnessError> {
    append_lines(path, items, true)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, HarnessError> {
    read_lines(path)
}

pub fn write_manifest(path: &Path, m: &RunManifest) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, HarnessError> {
    let m: RunManifest = serde_json::from_slice(&fs::read(path)?)?;
    if m.schema_version != RECORD_SCHEMA_VERSION {
        return Err(HarnessError::SchemaVersionMismatch {
            found: m.schema_version,
            expected: RECORD_SCHEMA_VERSION,
        });
    }
    Ok(m)
}
