use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{train_test_split, LabeledPair};
use super::embed::EmbeddingProvider;
use super::model::{bce_with_logit, AlignmentModel, LayerGrad, ModelShape, Variant};
use super::AlignError;
use crate::metrics::ConfusionCounts;

/// An embedded pair with a 0/1 target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub split_ratio: f64,
    pub early_stop_patience: usize,
    /// Share of the training side held out to drive early stopping.
    pub validation_fraction: f64,
    pub threshold: f64,
    pub shape: ModelShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            split_ratio: 0.8,
            early_stop_patience: 5,
            validation_fraction: 0.1,
            threshold: 0.5,
            shape: ModelShape::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: &str| Err(AlignError::InvalidConfig(m.into()));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning_rate must be positive and momentum in [0, 1)");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub epochs_run: usize,
    /// Epoch whose weights were kept; 0 means the initialization.
    pub best_epoch: usize,
    /// Mean loss over the fitting set at initialization and after each epoch.
    pub train_loss: Vec<f64>,
    /// Same for the validation slice (empty when there is none).
    pub validation_loss: Vec<f64>,
    pub train_f1: f64,
    pub test_f1: f64,
    /// Share of aligned pairs in the test side.
    pub test_prevalence: f64,
}

pub fn bce_loss(model: &AlignmentModel, examples: &[Example]) -> Result<f64, AlignError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|e| model.logit(&e.q, &e.c).map(|z| bce_with_logit(z, e.y)))
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / examples.len() as f64)
}

/// F1 of the aligned class at the model's threshold; 0 when undefined.
pub fn evaluate_f1(model: &AlignmentModel, examples: &[Example]) -> Result<f64, AlignError> {
    let predicted: Vec<bool> = examples
        .par_iter()
        .map(|e| model.probability(&e.q, &e.c).map(|p| p >= model.threshold))
        .collect::<Result<_, _>>()?;
    let gold: Vec<bool> = examples.iter().map(|e| e.y > 0.5).collect();
    let c = ConfusionCounts::from_labels(&predicted, &gold).expect("equal lengths");
    let denom = 2 * c.tp + c.fp + c.fn_;
    Ok(if denom == 0 { 0.0 } else { 2.0 * c.tp as f64 / denom as f64 })
}

pub fn embed_pairs<P: EmbeddingProvider + ?Sized>(pairs: &[LabeledPair], provider: &P) -> Result<Vec<Example>, AlignError> {
    pairs
        .par_iter()
        .map(|p| {
            Ok(Example {
                q: provider.embed(&p.question)?.values,
                c: provider.embed(&p.code)?.values,
                y: p.label.as_target(),
            })
        })
        .collect()
}

fn accumulate(model: &AlignmentModel, batch: &[&Example]) -> Result<Vec<LayerGrad>, AlignError> {
    let per: Vec<Vec<LayerGrad>> = batch
        .par_iter()
        .map(|e| model.backward(&e.q, &e.c, e.y).map(|(_, g)| g))
        .collect::<Result<_, _>>()?;
    // summed in input order so results do not depend on thread count
    let mut total = per[0].clone();
    for g in &per[1..] {
        for (t, l) in total.iter_mut().zip(g) {
            t.w.iter_mut().zip(&l.w).for_each(|(a, b)| *a += b);
            t.b.iter_mut().zip(&l.b).for_each(|(a, b)| *a += b);
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for t in &mut total {
        t.w.iter_mut().chain(t.b.iter_mut()).for_each(|v| *v *= scale);
    }
    Ok(total)
}

/// Mini-batch gradient descent with momentum on binary cross entropy.
/// The data is split `split_ratio` train / rest test; a slice of the
/// training side is held back for early stopping and the best weights on
/// it are kept.
pub fn train_embedded(
    variant: Variant,
    examples: &[Example],
    cfg: &TrainConfig,
    provider_id: &str,
) -> Result<(AlignmentModel, TrainReport), AlignError> {
    cfg.validate()?;
    let positives = examples.iter().filter(|e| e.y > 0.5).count();
    if positives == 0 || positives == examples.len() {
        return Err(AlignError::SingleClassDataset);
    }
    let dim = examples[0].q.len();
    for e in examples {
        for v in [&e.q, &e.c] {
            if v.len() != dim {
                return Err(AlignError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
        }
    }

    let (train_side, test) = train_test_split(examples, cfg.split_ratio, cfg.seed)?;
    let (fit, validation) = if cfg.validation_fraction > 0.0 && train_side.len() >= 10 {
        train_test_split(&train_side, 1.0 - cfg.validation_fraction, cfg.seed.wrapping_add(1))?
    } else {
        (train_side, Vec::new())
    };
    if fit.is_empty() {
        return Err(AlignError::InvalidConfig("no examples left to fit".into()));
    }

    let mut model = AlignmentModel::init(variant, dim, &cfg.shape, cfg.seed, provider_id);
    model.threshold = cfg.threshold;
    let mut velocity: Vec<LayerGrad> = model
        .layers
        .iter()
        .map(|l| LayerGrad {
            w: vec![0.0; l.weights.len()],
            b: vec![0.0; l.bias.len()],
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let monitor = |m: &AlignmentModel| -> Result<f64, AlignError> {
        if validation.is_empty() {
            bce_loss(m, &fit)
        } else {
            bce_loss(m, &validation)
        }
    };

    let mut train_loss = vec![bce_loss(&model, &fit)?];
    let mut validation_loss = Vec::new();
    if !validation.is_empty() {
        validation_loss.push(bce_loss(&model, &validation)?);
    }
    let mut best = (monitor(&model)?, 0usize, model.clone());
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..fit.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &fit[i]).collect();
            let grads = accumulate(&model, &batch)?;
            for ((layer, v), g) in model.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                for ((p, vel), gr) in layer.weights.iter_mut().zip(&mut v.w).zip(&g.w) {
                    *vel = cfg.momentum * *vel - cfg.learning_rate * gr;
                    *p += *vel;
                }
                for ((p, vel), gr) in layer.bias.iter_mut().zip(&mut v.b).zip(&g.b) {
                    *vel = cfg.momentum * *vel - cfg.learning_rate * gr;
                    *p += *vel;
                }
            }
        }
        epochs_run = epoch;
        train_loss.push(bce_loss(&model, &fit)?);
        if !validation.is_empty() {
            validation_loss.push(bce_loss(&model, &validation)?);
        }
        let watched = monitor(&model)?;
        if watched < best.0 {
            best = (watched, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let (_, best_epoch, model) = best;
    let mut train_all = fit.clone();
    train_all.extend(validation.iter().cloned());
    let report = TrainReport {
        train_size: fit.len(),
        validation_size: validation.len(),
        test_size: test.len(),
        epochs_run,
        best_epoch,
        train_loss,
        validation_loss,
        train_f1: evaluate_f1(&model, &train_all)?,
        test_f1: evaluate_f1(&model, &test)?,
        test_prevalence: if test.is_empty() {
            0.0
        } else {
            test.iter().filter(|e| e.y > 0.5).count() as f64 / test.len() as f64
        },
    };
    Ok((model, report))
}

/// Embeds every pair with `provider`, then trains.
pub fn train<P: EmbeddingProvider + ?Sized>(
    variant: Variant,
    dataset: &[LabeledPair],
    provider: &P,
    cfg: &TrainConfig,
) -> Result<(AlignmentModel, TrainReport), AlignError> {
    let labels: std::collections::HashSet<_> = dataset.iter().map(|p| p.label).collect();
    if labels.len() < 2 {
        return Err(AlignError::SingleClassDataset);
    }
    let examples = embed_pairs(dataset, provider)?;
    train_embedded(variant, &examples, cfg, provider.id())
}

pub fn score(model: &AlignmentModel, q: &[f64], c: &[f64]) -> Result<f64, AlignError> {
    model.probability(q, c)
}

pub fn score_texts<P: EmbeddingProvider + ?Sized>(
    model: &AlignmentModel,
    question: &str,
    code: &str,
    provider: &P,
) -> Result<f64, AlignError> {
    if provider.dim() != model.embedding_dim {
        return Err(AlignError::DimensionMismatch {
            expected: model.embedding_dim,
            got: provider.dim(),
        });
    }
    let q = provider.embed(question)?;
    let c = provider.embed(code)?;
    model.probability(&q.values, &c.values)
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    // the floor keeps near-zero gradients from turning rounding noise
    // into large ratios
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-4)
}

fn flat_gradient(model: &AlignmentModel, e: &Example) -> Result<Vec<f64>, AlignError> {
    let (_, grads) = model.backward(&e.q, &e.c, e.y)?;
    Ok(grads.into_iter().flat_map(|g| g.w.into_iter().chain(g.b)).collect())
}

fn numeric_derivative(model: &AlignmentModel, e: &Example, i: usize, epsilon: f64) -> Result<f64, AlignError> {
    let mut m = model.clone();
    let base = *m.param_mut(i);
    *m.param_mut(i) = base + epsilon;
    let up = bce_with_logit(m.logit(&e.q, &e.c)?, e.y);
    *m.param_mut(i) = base - epsilon;
    let down = bce_with_logit(m.logit(&e.q, &e.c)?, e.y);
    Ok((up - down) / (2.0 * epsilon))
}

fn check_epsilon(epsilon: f64) -> Result<(), AlignError> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(AlignError::InvalidConfig(format!("epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    Ok(())
}

/// Largest relative gap between backpropagated and central-difference
/// gradients over every parameter.
pub fn gradient_check(model: &AlignmentModel, sample: &Example, epsilon: f64) -> Result<f64, AlignError> {
    check_epsilon(epsilon)?;
    let analytic = flat_gradient(model, sample)?;
    (0..analytic.len())
        .into_par_iter()
        .map(|i| numeric_derivative(model, sample, i, epsilon).map(|n| relative_error(analytic[i], n)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// As [`gradient_check`] over `probes` parameters drawn with `seed`.
pub fn gradient_check_probes(
    model: &AlignmentModel,
    sample: &Example,
    epsilon: f64,
    probes: usize,
    seed: u64,
) -> Result<f64, AlignError> {
    check_epsilon(epsilon)?;
    let analytic = flat_gradient(model, sample)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..probes).map(|_| rng.random_range(0..analytic.len())).collect();
    picks
        .into_par_iter()
        .map(|i| numeric_derivative(model, sample, i, epsilon).map(|n| relative_error(analytic[i], n)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}
