use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AlignError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Aligned,
    Misaligned,
}

impl Label {
    pub fn as_target(self) -> f64 {
        match self {
            Label::Aligned => 1.0,
            Label::Misaligned => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    ExecutionDerived,
    SwapDerived,
    HumanAnnotated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub question: String,
    pub code: String,
    pub label: Label,
    pub origin: Origin,
}

impl LabeledPair {
    pub fn aligned(question: impl Into<String>, code: impl Into<String>, origin: Origin) -> Self {
        LabeledPair {
            question: question.into(),
            code: code.into(),
            label: Label::Aligned,
            origin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SwapScheme {
    /// Pairs up a seeded shuffle two at a time.
    AdjacentSwap,
    /// Every ordered cross-assignment, sampled down to `cap` if given.
    AllPairs { cap: Option<usize> },
}

/// Misaligned pairs made by exchanging code between aligned pairs. Inputs
/// that are not aligned are ignored. Outputs that coincide with an input
/// pair (two inputs sharing code, say) are discarded, as are repeats.
pub fn swap_augment(aligned: &[LabeledPair], scheme: SwapScheme, seed: u64) -> Vec<LabeledPair> {
    let src: Vec<&LabeledPair> = aligned.iter().filter(|p| p.label == Label::Aligned).collect();
    let n = src.len();
    if n < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignments: Vec<(usize, usize)> = match scheme {
        SwapScheme::AdjacentSwap => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order.chunks_exact(2).flat_map(|w| [(w[0], w[1]), (w[1], w[0])]).collect()
        }
        SwapScheme::AllPairs { cap } => {
            let mut all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
            if let Some(cap) = cap.filter(|&c| c < all.len()) {
                all.shuffle(&mut rng);
                all.truncate(cap);
                all.sort_unstable();
            }
            all
        }
    };
    let originals: HashSet<(&str, &str)> = src.iter().map(|p| (p.question.as_str(), p.code.as_str())).collect();
    let mut seen = HashSet::new();
    assignments
        .into_iter()
        .filter_map(|(i, j)| {
            let key = (src[i].question.as_str(), src[j].code.as_str());
            if originals.contains(&key) || !seen.insert(key) {
                return None;
            }
            Some(LabeledPair {
                question: src[i].question.clone(),
                code: src[j].code.clone(),
                label: Label::Misaligned,
                origin: Origin::SwapDerived,
            })
        })
        .collect()
}

/// Seeded shuffle, then the first `round(ratio * n)` items train.
pub fn train_test_split<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), AlignError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(AlignError::InvalidConfig(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (ratio * items.len() as f64).round() as usize;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub fn write_pairs_jsonl(path: &Path, pairs: &[LabeledPair]) -> Result<(), AlignError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_jsonl(path: &Path) -> Result<Vec<LabeledPair>, AlignError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
