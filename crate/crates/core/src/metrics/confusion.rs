use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tallies predictions against gold labels.
    pub fn from_labels(predicted: &[bool], gold: &[bool]) -> Result<Self, MetricsError> {
        if predicted.len() != gold.len() {
            return Err(MetricsError::LengthMismatch {
                left: predicted.len(),
                right: gold.len(),
            });
        }
        let mut c = ConfusionCounts::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }
}

/// Derived rates. A rate whose denominator is zero is reported as 0 and
/// flagged in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: Vec<String>,
}

pub fn confusion_summary(c: &ConfusionCounts) -> Result<ConfusionSummary, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyCounts);
    }
    let mut undefined = Vec::new();
    let mut ratio = |num: u64, den: u64, name: &str| {
        if den == 0 {
            undefined.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp, "precision");
    let recall = ratio(c.tp, c.tp + c.fn_, "recall");
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_, "f1");
    Ok(ConfusionSummary {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        undefined,
    })
}

/// A rate as a percentage rounded to one decimal, e.g. 0.83495 -> 83.5.
pub fn round_percent(rate: f64) -> f64 {
    (rate * 1000.0).round() / 10.0
}
