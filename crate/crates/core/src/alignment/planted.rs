//! Synthetic embedding datasets with a known labelling rule, used to check
//! that the classifier can learn what it should.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::data::{Label, LabeledPair, Origin};
use super::embed::LookupEmbeddingProvider;
use super::train::Example;

/// Minimum distance of a planted score from the decision boundary.
const MARGIN: f64 = 0.3;

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v = gaussian(rng, dim);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian question and code vectors labelled by the sign of a hidden
/// direction applied to `[q; c]`. Points within the margin are redrawn,
/// so the classes are linearly separable. Returns the direction too.
pub fn separable(n: usize, dim: usize, seed: u64) -> (Vec<Example>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = unit(&mut rng, 2 * dim);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let q = gaussian(&mut rng, dim);
        let c = gaussian(&mut rng, dim);
        let s = dot(&w[..dim], &q) + dot(&w[dim..], &c);
        if s.abs() < MARGIN {
            continue;
        }
        out.push(Example {
            q,
            c,
            y: if s > 0.0 { 1.0 } else { 0.0 },
        });
    }
    (out, w)
}

/// Labels depend on an interaction: a pair is aligned when question and
/// code fall on the same side of a hidden hyperplane. No linear rule on
/// `[q; c]` separates the classes.
pub fn interaction(n: usize, dim: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = unit(&mut rng, dim);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let q = gaussian(&mut rng, dim);
        let c = gaussian(&mut rng, dim);
        let (a, b) = (dot(&u, &q), dot(&u, &c));
        if a.abs() < MARGIN || b.abs() < MARGIN {
            continue;
        }
        // the label is drawn first and c reflected to match, keeping the
        // classes balanced
        let same = rng.random_bool(0.5);
        let c = if ((a > 0.0) == (b > 0.0)) == same { c } else { c.iter().map(|x| -x).collect() };
        out.push(Example {
            q,
            c,
            y: if same { 1.0 } else { 0.0 },
        });
    }
    out
}

/// Wraps examples as text pairs plus a lookup provider that maps each
/// text back to its vector.
pub fn as_pairs(examples: &[Example], provider_id: &str) -> (Vec<LabeledPair>, LookupEmbeddingProvider) {
    let dim = examples.first().map_or(0, |e| e.q.len());
    let mut provider = LookupEmbeddingProvider::new(provider_id, dim);
    let mut pairs = Vec::with_capacity(examples.len());
    for (i, e) in examples.iter().enumerate() {
        let (q, c) = (format!("question {i}"), format!("code {i}"));
        provider.insert(q.clone(), e.q.clone()).expect("uniform width");
        provider.insert(c.clone(), e.c.clone()).expect("uniform width");
        pairs.push(LabeledPair {
            question: q,
            code: c,
            label: if e.y > 0.5 { Label::Aligned } else { Label::Misaligned },
            origin: Origin::ExecutionDerived,
        });
    }
    (pairs, provider)
}
