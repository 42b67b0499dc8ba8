use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall with "positive iff score > threshold", at a sentinel
/// threshold just below the minimum score and at every distinct score
/// that still predicts at least one positive. Sorted by threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(s));
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Sweep from the highest score down; after consuming every item with
    // score > t we have the counts for threshold t.
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut thresholds = vec![distinct[0].next_down()];
    thresholds.extend(distinct);

    let mut points = Vec::with_capacity(thresholds.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    for &t in thresholds.iter().rev() {
        while k < order.len() && scores[order[k]] > t {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        if tp + fp == 0 {
            continue;
        }
        points.push(PrPoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    points.reverse();
    Ok(points)
}

/// Best precision among points whose recall is at least `recall`.
pub fn precision_at_recall(curve: &[PrPoint], recall: f64) -> Option<f64> {
    curve
        .iter()
        .filter(|p| p.recall >= recall)
        .map(|p| p.precision)
        .max_by(f64::total_cmp)
}

pub fn pr_curve_to_csv(curve: &[PrPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "precision", "recall"]).expect("in-memory write");
    for p in curve {
        w.write_record([p.threshold.to_string(), p.precision.to_string(), p.recall.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// An item is aligned only when every annotator marked it aligned.
pub fn ensemble_labels(annotations: &[Vec<bool>]) -> Result<Vec<bool>, MetricsError> {
    let first = annotations.first().ok_or(MetricsError::NoAnnotators)?;
    if let Some(bad) = annotations.iter().find(|a| a.len() != first.len()) {
        return Err(MetricsError::LengthMismatch {
            left: first.len(),
            right: bad.len(),
        });
    }
    Ok((0..first.len()).map(|i| annotations.iter().all(|a| a[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sweep(scores: &[f64], labels: &[bool], t: f64) -> Option<(f64, f64)> {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut pos = 0.0;
        for (s, l) in scores.iter().zip(labels) {
            if *l {
                pos += 1.0;
            }
            if *s > t {
                if *l {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        (tp + fp > 0.0).then(|| (tp / (tp + fp), tp / pos))
    }

    #[test]
    fn separable_scores_have_full_precision() {
        let scores = [0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
        let labels = [false, false, false, true, true, true];
        let curve = pr_curve(&scores, &labels).unwrap();
        for r in [0.2, 0.5, 1.0] {
            assert_eq!(precision_at_recall(&curve, r), Some(1.0));
        }
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let curve = pr_curve(&[0.5; 4], &[true, false, false, false]).unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(curve[0].recall, 1.0);
        assert_eq!(curve[0].precision, 0.25);
    }

    #[test]
    fn random_fixture_matches_brute_force_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let scores: Vec<f64> = (0..10).map(|_| (rng.random_range(0..6) as f64) / 5.0).collect();
        let mut labels: Vec<bool> = (0..10).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        let curve = pr_curve(&scores, &labels).unwrap();
        let mut expected = Vec::new();
        let mut ts: Vec<f64> = scores.clone();
        ts.push(scores.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-9);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        for t in ts {
            if let Some(pr) = sweep(&scores, &labels, t) {
                expected.push(pr);
            }
        }
        let got: Vec<(f64, f64)> = curve.iter().map(|p| (p.precision, p.recall)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn errors() {
        assert_eq!(pr_curve(&[0.1], &[false]), Err(MetricsError::NoPositives));
        assert!(matches!(pr_curve(&[0.1, 0.2], &[true]), Err(MetricsError::LengthMismatch { .. })));
        assert!(matches!(pr_curve(&[f64::NAN], &[true]), Err(MetricsError::NonFiniteScore(_))));
        assert_eq!(ensemble_labels(&[]), Err(MetricsError::NoAnnotators));
    }

    #[test]
    fn ensemble_is_unanimity() {
        let all = vec![vec![true; 3]; 4];
        assert_eq!(ensemble_labels(&all).unwrap(), vec![true; 3]);
        let mut votes = all.clone();
        votes[2][1] = false;
        assert_eq!(ensemble_labels(&votes).unwrap(), vec![true, false, true]);
    }

    #[test]
    fn planted_309_item_ensemble() {
        let mut rng = ChaCha8Rng::seed_from_u64(309);
        let votes: Vec<Vec<bool>> = (0..4).map(|_| (0..309).map(|_| rng.random_bool(0.85)).collect()).collect();
        let mut hand = 0;
        for i in 0..309 {
            if votes[0][i] && votes[1][i] && votes[2][i] && votes[3][i] {
                hand += 1;
            }
        }
        let ens = ensemble_labels(&votes).unwrap();
        assert_eq!(ens.iter().filter(|b| **b).count(), hand);
    }

    proptest! {
        #[test]
        fn curve_properties(data in prop::collection::vec((0u8..20, any::<bool>()), 1..60)) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 19.0).collect();
            let mut labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            labels[0] = true;
            let curve = pr_curve(&scores, &labels).unwrap();
            prop_assert_eq!(curve[0].recall, 1.0);
            prop_assert!(curve[0].threshold < scores.iter().cloned().fold(f64::INFINITY, f64::min));
            for w in curve.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[0].recall >= w[1].recall);
            }
        }

        #[test]
        fn ensemble_bounded_by_each_annotator(votes in prop::collection::vec(prop::collection::vec(any::<bool>(), 12), 1..5)) {
            let ens = ensemble_labels(&votes).unwrap();
            let n = ens.iter().filter(|b| **b).count();
            for v in &votes {
                prop_assert!(n <= v.iter().filter(|b| **b).count());
            }
        }
    }
}
