use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ReportConfig, ShotsSetting};
use super::records::{read_records, Annotation, InsightRecord, RecordStatus};
use super::svg::{Mark, Plot};
use super::HarnessError;
use crate::alignment::Label;
use crate::genpipe::{GenerationStyle, Usage};
use crate::metrics::{
    bucket_labels, bucket_slot, code_length, confusion_summary, diversity_across_tables, ensemble_labels,
    pairwise_diversity, pr_curve, prefix_diversity, series_by_index, ConfusionCounts, DiversityAggregation,
    IndexSeries,
};

/// Bins of the alignment score histogram over [0, 1].
const SCORE_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalWhich {
    Alignment,
    Diversity,
    Cost,
}

impl EvalWhich {
    pub const ALL: [EvalWhich; 3] = [EvalWhich::Alignment, EvalWhich::Diversity, EvalWhich::Cost];

    pub fn name(self) -> &'static str {
        match self {
            EvalWhich::Alignment => "alignment",
            EvalWhich::Diversity => "diversity",
            EvalWhich::Cost => "cost",
        }
    }

    pub fn from_name(s: &str) -> Option<EvalWhich> {
        EvalWhich::ALL.into_iter().find(|w| w.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub which: EvalWhich,
    pub out_dir: PathBuf,
    /// Labels from humans, judges or any other annotator, matched to records
    /// by (run, table, index).
    pub annotations: Vec<Annotation>,
    /// Classifier scores at or above this count as aligned.
    pub threshold: f64,
    pub report: ReportConfig,
    pub aggregation: DiversityAggregation,
}

impl EvalOptions {
    pub fn new(which: EvalWhich, out_dir: impl Into<PathBuf>) -> Self {
        EvalOptions {
            which,
            out_dir: out_dir.into(),
            annotations: Vec::new(),
            threshold: 0.5,
            report: ReportConfig::default(),
            aggregation: DiversityAggregation::default(),
        }
    }
}

struct Writer<'a> {
    opts: &'a EvalOptions,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn emit(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>, plot: Plot) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let path = self.opts.out_dir.join(format!("{name}.csv"));
        fs::write(&path, w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?)?;
        self.written.push(path);
        if self.opts.report.svg {
            let path = self.opts.out_dir.join(format!("{name}.svg"));
            fs::write(&path, plot.render())?;
            self.written.push(path);
        }
        Ok(())
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        v.to_string()
    }
}

/// Reads every records file and writes the requested report. Returns the
/// files written.
pub fn run_eval(records: &[PathBuf], opts: &EvalOptions) -> Result<Vec<PathBuf>, HarnessError> {
    let mut all = Vec::new();
    for p in records {
        all.extend(read_records(p)?);
    }
    eval_records(&all, opts)
}

pub fn eval_records(records: &[InsightRecord], opts: &EvalOptions) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    fs::create_dir_all(&opts.out_dir)?;
    let mut w = Writer {
        opts,
        written: Vec::new(),
    };
    match opts.which {
        EvalWhich::Alignment => alignment(records, &mut w)?,
        EvalWhich::Diversity => diversity(records, &mut w)?,
        EvalWhich::Cost => cost(records, &mut w)?,
    }
    Ok(w.written)
}

pub const CONFUSION_HEADER: [&str; 12] = [
    "gold", "predictor", "items", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall", "f1", "undefined",
];

type Key = (String, String, usize);

fn key_of(r: &InsightRecord) -> Key {
    (r.run_id.clone(), r.table_id.clone(), r.index)
}

/// Gold label sources: each annotator, plus their unanimous ensemble when
/// there are several. Each maps record keys to "aligned".
fn gold_sources(annotations: &[Annotation]) -> Result<Vec<(String, BTreeMap<Key, bool>)>, HarnessError> {
    let mut by: BTreeMap<String, BTreeMap<Key, bool>> = BTreeMap::new();
    for a in annotations {
        by.entry(a.annotator.clone())
            .or_default()
            .insert((a.run_id.clone(), a.table_id.clone(), a.index), a.label == Label::Aligned);
    }
    let mut out: Vec<(String, BTreeMap<Key, bool>)> = by.clone().into_iter().collect();
    if by.len() > 1 {
        let common: Vec<Key> = by
            .values()
            .next()
            .map(|m| m.keys().filter(|k| by.values().all(|o| o.contains_key(*k))).cloned().collect())
            .unwrap_or_default();
        let votes: Vec<Vec<bool>> = by.values().map(|m| common.iter().map(|k| m[k]).collect()).collect();
        let labels = ensemble_labels(&votes)?;
        out.push(("ensemble".into(), common.into_iter().zip(labels).collect()));
    }
    Ok(out)
}

fn confusion_row(gold: &str, predictor: &str, pairs: &[(bool, bool)]) -> Result<Option<Vec<String>>, HarnessError> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let (pred, truth): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
    let c = ConfusionCounts::from_labels(&pred, &truth)?;
    let s = confusion_summary(&c)?;
    Ok(Some(vec![
        gold.to_string(),
        predictor.to_string(),
        c.total().to_string(),
        c.tp.to_string(),
        c.tn.to_string(),
        c.fp.to_string(),
        c.fn_.to_string(),
        num(s.accuracy),
        num(s.precision),
        num(s.recall),
        num(s.f1),
        s.undefined.join(";"),
    ]))
}

fn series_plot(title: &str, x: &str, y: &str, series: &[(String, IndexSeries)]) -> Plot {
    series.iter().fold(Plot::new(title, x, y, Mark::Line), |p, (name, s)| {
        p.with_series(name.clone(), s.points.iter().map(|pt| (pt.index as f64, pt.mean)).collect())
    })
}

fn series_rows(series: &[(String, IndexSeries)]) -> Vec<Vec<String>> {
    series
        .iter()
        .flat_map(|(name, s)| {
            s.points
                .iter()
                .map(move |p| vec![name.clone(), p.index.to_string(), num(p.mean), p.count.to_string()])
        })
        .collect()
}

fn alignment(records: &[InsightRecord], w: &mut Writer) -> Result<(), HarnessError> {
    let opts = w.opts;
    let scored: Vec<(&InsightRecord, f64)> = records
        .iter()
        .filter(|r| r.status == RecordStatus::Executable)
        .filter_map(|r| r.alignment_score.map(|s| (r, s)))
        .collect();

    let mut bins = [0usize; SCORE_BINS];
    for (_, s) in &scored {
        bins[((s * SCORE_BINS as f64) as usize).min(SCORE_BINS - 1)] += 1;
    }
    let rows = bins
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let lo = i as f64 / SCORE_BINS as f64;
            vec![num(lo), num(lo + 1.0 / SCORE_BINS as f64), n.to_string()]
        })
        .collect();
    let hist = bins.iter().enumerate().map(|(i, n)| ((i as f64 + 0.5) / SCORE_BINS as f64, *n as f64)).collect();
    w.emit(
        "alignment_scores",
        &["bin_low", "bin_high", "count"],
        rows,
        Plot::new("Alignment scores of executable pairs", "score", "pairs", Mark::Line).with_series("executable", hist),
    )?;

    let by_style: BTreeMap<String, Vec<(usize, f64)>> = scored.iter().fold(BTreeMap::new(), |mut m, (r, s)| {
        m.entry(format!("{}/{}", r.style.short_name(), r.shots.name())).or_default().push((r.index, *s));
        m
    });
    let series: Vec<(String, IndexSeries)> = by_style.into_iter().map(|(k, v)| (k, series_by_index(&v))).collect();
    w.emit(
        "alignment_by_index",
        &["setting", "index", "mean", "count"],
        series_rows(&series),
        series_plot("Alignment by insight index", "insight index", "mean score", &series),
    )?;

    if opts.annotations.is_empty() {
        return Ok(());
    }
    let golds = gold_sources(&opts.annotations)?;
    let annotators: BTreeMap<&str, HashMap<Key, bool>> = golds
        .iter()
        .filter(|(name, _)| name != "ensemble")
        .map(|(name, m)| (name.as_str(), m.iter().map(|(k, v)| (k.clone(), *v)).collect()))
        .collect();
    let score_of: HashMap<Key, f64> = scored.iter().map(|(r, s)| (key_of(r), *s)).collect();

    let mut rows = Vec::new();
    let mut pr_rows = Vec::new();
    let mut plot = Plot::new("Precision and recall of the classifier", "recall", "precision", Mark::Line);
    for (gold, labels) in &golds {
        let classifier: Vec<(f64, bool)> =
            labels.iter().filter_map(|(k, truth)| score_of.get(k).map(|s| (*s, *truth))).collect();
        let pairs: Vec<(bool, bool)> = classifier.iter().map(|(s, t)| (*s >= opts.threshold, *t)).collect();
        rows.extend(confusion_row(gold, "classifier", &pairs)?);
        for (name, votes) in &annotators {
            if name == gold || gold == "ensemble" {
                continue;
            }
            let pairs: Vec<(bool, bool)> = labels.iter().filter_map(|(k, t)| votes.get(k).map(|p| (*p, *t))).collect();
            rows.extend(confusion_row(gold, name, &pairs)?);
        }
        let (scores, truth): (Vec<f64>, Vec<bool>) = classifier.into_iter().unzip();
        if truth.iter().any(|t| *t) {
            let curve = pr_curve(&scores, &truth)?;
            plot = plot.with_series(gold.clone(), curve.iter().map(|p| (p.recall, p.precision)).collect());
            pr_rows.extend(
                curve
                    .iter()
                    .map(|p| vec![gold.clone(), num(p.threshold), num(p.precision), num(p.recall)]),
            );
        }
    }
    let agreement = rows.iter().fold(Plot::new("Agreement with gold labels", "recall", "precision", Mark::Scatter), |p, r| {
        let parse = |s: &str| s.parse::<f64>().unwrap_or(0.0);
        p.with_series(format!("{} vs {}", r[1], r[0]), vec![(parse(&r[9]), parse(&r[8]))])
    });
    w.emit("alignment_confusion", &CONFUSION_HEADER, rows, agreement)?;
    w.emit("alignment_pr", &["gold", "threshold", "precision", "recall"], pr_rows, plot)
}

type Setting = (GenerationStyle, ShotsSetting);

fn setting_name((style, shots): Setting) -> String {
    format!("{}/{}", style.short_name(), shots.name())
}

/// Executable records grouped into per-table code lists ordered by index.
fn codes_by_table(records: &[InsightRecord]) -> BTreeMap<(Setting, String, String), Vec<(usize, &InsightRecord)>> {
    let mut m: BTreeMap<(Setting, String, String), Vec<(usize, &InsightRecord)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == RecordStatus::Executable) {
        m.entry(((r.style, r.shots), r.run_id.clone(), r.table_id.clone()))
            .or_default()
            .push((r.index, r));
    }
    for v in m.values_mut() {
        v.sort_by_key(|(i, _)| *i);
    }
    m
}

fn diversity(records: &[InsightRecord], w: &mut Writer) -> Result<(), HarnessError> {
    let opts = w.opts;
    let tables = codes_by_table(records);

    let mut per_setting: BTreeMap<Setting, Vec<Vec<&str>>> = BTreeMap::new();
    for ((setting, _, _), v) in &tables {
        per_setting
            .entry(*setting)
            .or_default()
            .push(v.iter().map(|(_, r)| r.code.as_str()).collect());
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (k, (setting, groups)) in per_setting.iter().enumerate() {
        let mean = diversity_across_tables(groups, opts.aggregation)?;
        let reports = groups
            .iter()
            .filter(|g| g.len() >= 2)
            .map(|g| pairwise_diversity(g))
            .collect::<Result<Vec<_>, _>>()?;
        let normalized = if reports.is_empty() {
            0.0
        } else {
            reports.iter().map(|r| r.normalized_mean).sum::<f64>() / reports.len() as f64
        };
        let n_codes: usize = groups.iter().map(Vec::len).sum();
        rows.push(vec![
            setting.0.short_name().to_string(),
            setting.1.name().to_string(),
            groups.len().to_string(),
            n_codes.to_string(),
            num(mean),
            num(normalized),
        ]);
        points.push((setting_name(*setting), vec![(k as f64, mean)]));
    }
    let plot = points
        .into_iter()
        .fold(Plot::new("Diversity by generation setting", "setting", "mean edit distance", Mark::Scatter), |p, (n, pts)| {
            p.with_series(n, pts)
        });
    w.emit(
        "diversity_by_style",
        &["style", "shots", "tables", "codes", "mean_pairwise_distance", "normalized_mean"],
        rows,
        plot,
    )?;

    let labels = bucket_labels(&opts.report.column_edges)?;
    let mut prefix: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    let mut lengths: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for v in tables.values() {
        let slot = bucket_slot(v[0].1.table_columns, &opts.report.column_edges);
        let codes: Vec<&str> = v.iter().map(|(_, r)| r.code.as_str()).collect();
        for (k, d) in prefix_diversity(&codes)?.into_iter().enumerate() {
            prefix.entry(slot).or_default().push((k, d));
        }
        for (i, r) in v {
            lengths.entry(slot).or_default().push((*i, code_length(&r.code)? as f64));
        }
    }
    let named = |m: BTreeMap<usize, Vec<(usize, f64)>>| -> Vec<(String, IndexSeries)> {
        m.into_iter().map(|(slot, v)| (labels[slot].clone(), series_by_index(&v))).collect()
    };
    let prefix = named(prefix);
    let lengths = named(lengths);
    w.emit(
        "diversity_prefix",
        &["bucket", "index", "mean", "count"],
        series_rows(&prefix),
        series_plot("Diversity as insights accumulate", "insights generated", "mean edit distance", &prefix),
    )?;
    w.emit(
        "code_length",
        &["bucket", "index", "mean", "count"],
        series_rows(&lengths),
        series_plot("Code length by insight index", "insight index", "characters", &lengths),
    )
}

fn cost(records: &[InsightRecord], w: &mut Writer) -> Result<(), HarnessError> {
    let mut per: BTreeMap<GenerationStyle, (BTreeSet<(&str, &str)>, Usage)> = BTreeMap::new();
    for r in records {
        let e = per.entry(r.style).or_default();
        e.0.insert((&r.run_id, &r.table_id));
        e.1 += r.usage;
    }
    let mut rows = Vec::new();
    let mut plot = Plot::new("Cost per table by generation style", "seconds per table", "tokens per table", Mark::Scatter);
    for (style, (tables, u)) in &per {
        let n = tables.len() as f64;
        let tokens = u.total_tokens() as f64 / n;
        let seconds = u.wall_ms as f64 / 1000.0 / n;
        rows.push(vec![
            style.short_name().to_string(),
            tables.len().to_string(),
            u.prompt_tokens.to_string(),
            u.completion_tokens.to_string(),
            num(tokens),
            num(seconds),
        ]);
        plot = plot.with_series(style.short_name(), vec![(seconds, tokens)]);
    }
    w.emit(
        "cost",
        &["style", "tables", "prompt_tokens", "completion_tokens", "tokens_per_table", "seconds_per_table"],
        rows,
        plot,
    )
}

/// Reads back a report CSV as header plus rows.
pub fn read_report(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::records::tests::record;
    use crate::harness::records::RECORD_SCHEMA_VERSION;
    use crate::harness::write_records;
    use crate::metrics::round_percent;

    fn human(r: &InsightRecord, aligned: bool) -> Annotation {
        Annotation {
            run_id: r.run_id.clone(),
            table_id: r.table_id.clone(),
            index: r.index,
            annotator: "human".into(),
            label: if aligned { Label::Aligned } else { Label::Misaligned },
        }
    }

    /// Records whose scores and human labels land in the given cells.
    fn planted(tp: usize, tn: usize, fp: usize, fn_: usize) -> (Vec<InsightRecord>, Vec<Annotation>) {
        let cells = [(tp, 0.9, true), (tn, 0.1, false), (fp, 0.8, false), (fn_, 0.2, true)];
        let mut recs = Vec::new();
        let mut anns = Vec::new();
        for (n, score, aligned) in cells {
            for _ in 0..n {
                let r = record("t", recs.len(), "len(table)", RecordStatus::Executable, Some(score));
                anns.push(human(&r, aligned));
                recs.push(r);
            }
        }
        (recs, anns)
    }

    #[test]
    fn planted_confusion_reports_table_rates() {
        let dir = tempfile::tempdir().unwrap();
        let (recs, anns) = planted(217, 46, 12, 34);
        let mut opts = EvalOptions::new(EvalWhich::Alignment, dir.path());
        opts.annotations = anns;
        eval_records(&recs, &opts).unwrap();
        let (header, rows) = read_report(&dir.path().join("alignment_confusion.csv")).unwrap();
        assert_eq!(header, CONFUSION_HEADER);
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][..7], ["human", "classifier", "309", "217", "46", "12", "34"]);
        let acc: f64 = rows[0][7].parse().unwrap();
        let f1: f64 = rows[0][10].parse().unwrap();
        assert_eq!(round_percent(acc), 85.1);
        // 2*217 / (2*217 + 12 + 34) = 434 / 480
        assert_eq!(round_percent(f1), 90.4);
        assert!(dir.path().join("alignment_pr.svg").exists());
    }

    #[test]
    fn judge_and_ensemble_rows_appear_with_two_annotators() {
        let dir = tempfile::tempdir().unwrap();
        let (recs, mut anns) = planted(3, 2, 1, 1);
        let judge: Vec<Annotation> = recs
            .iter()
            .map(|r| Annotation {
                annotator: "judge".into(),
                ..human(r, true)
            })
            .collect();
        anns.extend(judge);
        let mut opts = EvalOptions::new(EvalWhich::Alignment, dir.path());
        opts.annotations = anns;
        eval_records(&recs, &opts).unwrap();
        let (_, rows) = read_report(&dir.path().join("alignment_confusion.csv")).unwrap();
        let pairs: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
        assert_eq!(
            pairs,
            [
                ("human", "classifier"),
                ("human", "judge"),
                ("judge", "classifier"),
                ("judge", "human"),
                ("ensemble", "classifier")
            ]
        );
        // the all-yes judge leaves the ensemble equal to the human labels
        assert_eq!(rows[4][3..7], rows[0][3..7]);
        // judge says yes to all 7: tp 4 (aligned), fp 3
        assert_eq!(rows[1][3..7], ["4", "0", "3", "0"]);
    }

    #[test]
    fn one_insight_per_table_has_zero_diversity() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<InsightRecord> = (0..4)
            .map(|t| record(&format!("t{t}"), 0, "table['a'].sum()", RecordStatus::Executable, None))
            .collect();
        eval_records(&recs, &EvalOptions::new(EvalWhich::Diversity, dir.path())).unwrap();
        let (_, rows) = read_report(&dir.path().join("diversity_by_style.csv")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][4], "0");
        assert_eq!(rows[0][5], "0");
    }

    #[test]
    fn diversity_matches_hand_computed_distance() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            record("t", 0, "table['A'].sum()", RecordStatus::Executable, None),
            record("t", 1, "table.groupby('A').size()", RecordStatus::Executable, None),
            record("t", 2, "nonsense(", RecordStatus::NonExecutable, None),
        ];
        eval_records(&recs, &EvalOptions::new(EvalWhich::Diversity, dir.path())).unwrap();
        let (_, rows) = read_report(&dir.path().join("diversity_by_style.csv")).unwrap();
        // the masked forms are "table[].sum()" and "table.groupby().size()"
        let expected = crate::metrics::edit_distance("table[].sum()", "table.groupby().size()");
        assert_eq!(rows[0][4], expected.to_string());
        let (_, prefix) = read_report(&dir.path().join("diversity_prefix.csv")).unwrap();
        assert_eq!(prefix.len(), 2);
        assert_eq!(prefix[0][0], "T(4-8)");
        assert_eq!(prefix[1][2], expected.to_string());
        let (_, lengths) = read_report(&dir.path().join("code_length.csv")).unwrap();
        assert_eq!(lengths[0][2], "13");
    }

    #[test]
    fn cost_is_per_table_mean() {
        let dir = tempfile::tempdir().unwrap();
        let mut recs = Vec::new();
        for (t, tokens) in [("a", 100), ("b", 300)] {
            let mut r = record(t, 0, "len(table)", RecordStatus::Executable, None);
            r.usage = Usage {
                prompt_tokens: tokens,
                completion_tokens: 0,
                wall_ms: 2000,
            };
            recs.push(r);
        }
        eval_records(&recs, &EvalOptions::new(EvalWhich::Cost, dir.path())).unwrap();
        let (_, rows) = read_report(&dir.path().join("cost.csv")).unwrap();
        assert_eq!(rows, [["qc", "2", "400", "0", "200", "2"]]);
    }

    #[test]
    fn empty_and_mismatched_inputs_fail() {
        let dir = tempfile::tempdir().unwrap();
        let opts = EvalOptions::new(EvalWhich::Cost, dir.path().join("out"));
        assert!(matches!(eval_records(&[], &opts), Err(HarnessError::EmptyRecords)));
        let path = dir.path().join("old.jsonl");
        let mut r = record("t", 0, "len(table)", RecordStatus::Executable, None);
        r.schema_version = RECORD_SCHEMA_VERSION + 1;
        write_records(&path, &[r]).unwrap();
        assert!(matches!(run_eval(&[path], &opts), Err(HarnessError::SchemaVersionMismatch { .. })));
    }

    #[test]
    fn report_headers_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let (recs, anns) = planted(5, 5, 1, 1);
        let golden: [(&str, &[&str]); 7] = [
            ("alignment_scores", &["bin_low", "bin_high", "count"]),
            ("alignment_by_index", &["setting", "index", "mean", "count"]),
            ("alignment_pr", &["gold", "threshold", "precision", "recall"]),
            (
                "diversity_by_style",
                &["style", "shots", "tables", "codes", "mean_pairwise_distance", "normalized_mean"],
            ),
            ("diversity_prefix", &["bucket", "index", "mean", "count"]),
            ("code_length", &["bucket", "index", "mean", "count"]),
            (
                "cost",
                &["style", "tables", "prompt_tokens", "completion_tokens", "tokens_per_table", "seconds_per_table"],
            ),
        ];
        for which in EvalWhich::ALL {
            let mut opts = EvalOptions::new(which, dir.path());
            opts.annotations = anns.clone();
            eval_records(&recs, &opts).unwrap();
        }
        for (name, header) in golden {
            let (h, _) = read_report(&dir.path().join(format!("{name}.csv"))).unwrap();
            assert_eq!(h, header, "{name}");
        }
    }
}
