use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dsl::{mask_constants, strip_string_literals};

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub n_codes: usize,
    pub mean_pairwise_distance: f64,
    pub normalized_mean: f64,
}

fn masked_all<S: AsRef<str>>(codes: &[S]) -> Result<Vec<String>, MetricsError> {
    codes
        .iter()
        .enumerate()
        .map(|(index, c)| mask_constants(c.as_ref()).map_err(|error| MetricsError::Lex { index, error }))
        .collect()
}

/// (raw, normalized) distance for one pair of masked codes.
fn pair(a: &str, b: &str) -> (f64, f64) {
    let d = edit_distance(a, b);
    let longest = a.chars().count().max(b.chars().count());
    let norm = if longest == 0 { 0.0 } else { d as f64 / longest as f64 };
    (d as f64, norm)
}

/// Sum of pair distances over all unordered pairs, in a fixed order.
fn pair_sums(masked: &[String]) -> (f64, f64, usize) {
    let pairs: Vec<(usize, usize)> = (0..masked.len())
        .flat_map(|i| (i + 1..masked.len()).map(move |j| (i, j)))
        .collect();
    let dists: Vec<(f64, f64)> = pairs.par_iter().map(|&(i, j)| pair(&masked[i], &masked[j])).collect();
    let (raw, norm) = dists.iter().fold((0.0, 0.0), |(r, n), (a, b)| (r + a, n + b));
    (raw, norm, pairs.len())
}

/// Mean edit distance between constant-masked codes over all unordered pairs.
pub fn pairwise_diversity<S: AsRef<str>>(codes: &[S]) -> Result<DiversityReport, MetricsError> {
    let masked = masked_all(codes)?;
    let (raw, norm, n) = pair_sums(&masked);
    let (mean, normalized) = if n == 0 { (0.0, 0.0) } else { (raw / n as f64, norm / n as f64) };
    Ok(DiversityReport {
        n_codes: codes.len(),
        mean_pairwise_distance: mean,
        normalized_mean: normalized,
    })
}

/// Entry k is the raw diversity of the first k+1 codes.
pub fn prefix_diversity<S: AsRef<str>>(codes: &[S]) -> Result<Vec<f64>, MetricsError> {
    let masked = masked_all(codes)?;
    let mut total = 0.0;
    let mut out = Vec::with_capacity(masked.len());
    for k in 0..masked.len() {
        for j in 0..k {
            total += edit_distance(&masked[j], &masked[k]) as f64;
        }
        let pairs = k * (k + 1) / 2;
        out.push(if pairs == 0 { 0.0 } else { total / pairs as f64 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityAggregation {
    /// Diversity within each table, then the mean over tables.
    #[default]
    MeanOfMeans,
    /// All within-table pairs pooled into one mean.
    Pooled,
}

/// Raw diversity over several tables' code lists. Tables with fewer than
/// two codes contribute nothing.
pub fn diversity_across_tables<S: AsRef<str>>(
    tables: &[Vec<S>],
    how: DiversityAggregation,
) -> Result<f64, MetricsError> {
    let mut means = Vec::new();
    let (mut raw, mut pairs) = (0.0, 0usize);
    for codes in tables.iter().filter(|c| c.len() >= 2) {
        let masked = masked_all(codes)?;
        let (r, _, n) = pair_sums(&masked);
        means.push(r / n as f64);
        raw += r;
        pairs += n;
    }
    Ok(match how {
        _ if pairs == 0 => 0.0,
        DiversityAggregation::MeanOfMeans => means.iter().sum::<f64>() / means.len() as f64,
        DiversityAggregation::Pooled => raw / pairs as f64,
    })
}

/// Character count of the code once string literals are removed.
pub fn code_length(code: &str) -> Result<usize, MetricsError> {
    strip_string_literals(code)
        .map(|s| s.chars().count())
        .map_err(|error| MetricsError::Lex { index: 0, error })
}
