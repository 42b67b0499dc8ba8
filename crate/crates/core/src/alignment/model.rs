use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AlignError;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Floor on projection norms below which the cosine is taken as 0.
const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `[q; c]` through the dense stack.
    Concat,
    /// `(q + c) / sqrt(2)` through the dense stack.
    Joint,
    /// Separate linear projections of `q` and `c`; their cosine goes
    /// through a one-input logistic unit.
    CosineProjection,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Concat, Variant::Joint, Variant::CosineProjection];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Concat => "concat",
            Variant::Joint => "joint",
            Variant::CosineProjection => "cosine",
        }
    }

    pub fn from_name(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative in terms of the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `rows x cols` weights stored row-major; maps `cols` inputs to `rows`
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    fn init(rows: usize, cols: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Dense {
        // He scaling ahead of ReLU, Glorot otherwise
        let sd = match activation {
            Activation::Relu => (2.0 / cols as f64).sqrt(),
            _ => (2.0 / (rows + cols) as f64).sqrt(),
        };
        let normal = Normal::new(0.0, sd).expect("finite sd");
        Dense {
            rows,
            cols,
            weights: (0..rows * cols).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; rows],
            activation,
        }
    }

    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        if i < self.weights.len() {
            &mut self.weights[i]
        } else {
            &mut self.bias[i - self.weights.len()]
        }
    }
}

/// Hidden widths for the dense variants and the projection width for the
/// cosine variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelShape {
    pub hidden: Vec<usize>,
    pub projection: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            hidden: vec![256, 64],
            projection: 128,
        }
    }
}

/// Gradient of the loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl LayerGrad {
    fn zeros(d: &Dense) -> LayerGrad {
        LayerGrad {
            w: vec![0.0; d.weights.len()],
            b: vec![0.0; d.bias.len()],
        }
    }

    fn outer(dz: &[f64], x: &[f64]) -> LayerGrad {
        let mut w = Vec::with_capacity(dz.len() * x.len());
        for d in dz {
            w.extend(x.iter().map(|v| d * v));
        }
        LayerGrad { w, b: dz.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentModel {
    pub version: u32,
    pub variant: Variant,
    pub embedding_dim: usize,
    pub input_dim: usize,
    /// Dense variants: the stack, last layer 1-wide with sigmoid. Cosine
    /// variant: question projection, code projection, 1x1 output unit.
    pub layers: Vec<Dense>,
    pub threshold: f64,
    pub provider_id: String,
}

impl AlignmentModel {
    pub fn init(variant: Variant, embedding_dim: usize, shape: &ModelShape, seed: u64, provider_id: &str) -> AlignmentModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input_dim, layers) = match variant {
            Variant::Concat | Variant::Joint => {
                let input_dim = if variant == Variant::Concat { 2 * embedding_dim } else { embedding_dim };
                let mut layers = Vec::new();
                let mut width = input_dim;
                for &h in &shape.hidden {
                    layers.push(Dense::init(h, width, Activation::Relu, &mut rng));
                    width = h;
                }
                layers.push(Dense::init(1, width, Activation::Sigmoid, &mut rng));
                (input_dim, layers)
            }
            Variant::CosineProjection => {
                let p = shape.projection;
                let mut head = Dense::init(1, 1, Activation::Sigmoid, &mut rng);
                head.weights[0] = 1.0;
                (
                    embedding_dim,
                    vec![
                        Dense::init(p, embedding_dim, Activation::Identity, &mut rng),
                        Dense::init(p, embedding_dim, Activation::Identity, &mut rng),
                        head,
                    ],
                )
            }
        };
        AlignmentModel {
            version: MODEL_FORMAT_VERSION,
            variant,
            embedding_dim,
            input_dim,
            layers,
            threshold: 0.5,
            provider_id: provider_id.to_string(),
        }
    }

    fn check(&self, q: &[f64], c: &[f64]) -> Result<(), AlignError> {
        for v in [q, c] {
            if v.len() != self.embedding_dim {
                return Err(AlignError::DimensionMismatch {
                    expected: self.embedding_dim,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    fn stack_input(&self, q: &[f64], c: &[f64]) -> Vec<f64> {
        match self.variant {
            Variant::Concat => q.iter().chain(c).copied().collect(),
            _ => q.iter().zip(c).map(|(a, b)| (a + b) / std::f64::consts::SQRT_2).collect(),
        }
    }

    /// Pre-sigmoid output.
    pub fn logit(&self, q: &[f64], c: &[f64]) -> Result<f64, AlignError> {
        self.check(q, c)?;
        Ok(match self.variant {
            Variant::CosineProjection => {
                let u = self.layers[0].pre_activation(q);
                let v = self.layers[1].pre_activation(c);
                let (s, ..) = cosine_parts(&u, &v);
                let head = &self.layers[2];
                head.weights[0] * s + head.bias[0]
            }
            _ => {
                let mut a = self.stack_input(q, c);
                let last = self.layers.len() - 1;
                for (i, layer) in self.layers.iter().enumerate() {
                    let z = layer.pre_activation(&a);
                    if i == last {
                        return Ok(z[0]);
                    }
                    a = z.into_iter().map(|v| layer.activation.apply(v)).collect();
                }
                unreachable!("stack has an output layer")
            }
        })
    }

    pub fn probability(&self, q: &[f64], c: &[f64]) -> Result<f64, AlignError> {
        Ok(sigmoid(self.logit(q, c)?))
    }

    /// Loss and parameter gradients for one example under binary cross
    /// entropy on the sigmoid output.
    pub(crate) fn backward(&self, q: &[f64], c: &[f64], y: f64) -> Result<(f64, Vec<LayerGrad>), AlignError> {
        self.check(q, c)?;
        match self.variant {
            Variant::CosineProjection => {
                let u = self.layers[0].pre_activation(q);
                let v = self.layers[1].pre_activation(c);
                let (s, nu, nv) = cosine_parts(&u, &v);
                let head = &self.layers[2];
                let z = head.weights[0] * s + head.bias[0];
                let dz = sigmoid(z) - y;
                let ds = dz * head.weights[0];
                let (du, dv): (Vec<f64>, Vec<f64>) = if nu < NORM_EPS || nv < NORM_EPS {
                    (vec![0.0; u.len()], vec![0.0; v.len()])
                } else {
                    (
                        u.iter().zip(&v).map(|(a, b)| ds * (b / (nu * nv) - s * a / (nu * nu))).collect(),
                        u.iter().zip(&v).map(|(a, b)| ds * (a / (nu * nv) - s * b / (nv * nv))).collect(),
                    )
                };
                let grads = vec![
                    LayerGrad::outer(&du, q),
                    LayerGrad::outer(&dv, c),
                    LayerGrad {
                        w: vec![dz * s],
                        b: vec![dz],
                    },
                ];
                Ok((bce_with_logit(z, y), grads))
            }
            _ => {
                let mut acts = vec![self.stack_input(q, c)];
                let mut pres = Vec::with_capacity(self.layers.len());
                for layer in &self.layers {
                    let z = layer.pre_activation(acts.last().expect("input"));
                    acts.push(z.iter().map(|&v| layer.activation.apply(v)).collect());
                    pres.push(z);
                }
                let z_out = pres.last().expect("output")[0];
                let mut dz = vec![sigmoid(z_out) - y];
                let mut grads: Vec<LayerGrad> = self.layers.iter().map(LayerGrad::zeros).collect();
                for l in (0..self.layers.len()).rev() {
                    let layer = &self.layers[l];
                    grads[l] = LayerGrad::outer(&dz, &acts[l]);
                    if l == 0 {
                        break;
                    }
                    let below = &self.layers[l - 1];
                    dz = (0..layer.cols)
                        .map(|j| {
                            let back: f64 = (0..layer.rows).map(|r| layer.weights[r * layer.cols + j] * dz[r]).sum();
                            back * below.activation.derivative(pres[l - 1][j])
                        })
                        .collect();
                }
                Ok((bce_with_logit(z_out, y), grads))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Flat parameter access in layer order, weights before biases.
    pub(crate) fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let n = layer.param_count();
            if i < n {
                return layer.param_mut(i);
            }
            i -= n;
        }
        panic!("parameter index out of range")
    }

    pub fn save(&self, path: &Path) -> Result<(), AlignError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<AlignmentModel, AlignError> {
        let m: AlignmentModel = serde_json::from_slice(&fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), AlignError> {
        let bad = |msg: String| Err(AlignError::ModelFormat(msg));
        if self.version != MODEL_FORMAT_VERSION {
            return bad(format!("version {} not supported", self.version));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return bad(format!("layer {i} has inconsistent sizes"));
            }
        }
        let widths_ok = match self.variant {
            Variant::CosineProjection => {
                self.layers.len() == 3
                    && self.layers[0].cols == self.embedding_dim
                    && self.layers[1].cols == self.embedding_dim
                    && self.layers[0].rows == self.layers[1].rows
                    && self.layers[2].rows == 1
                    && self.layers[2].cols == 1
            }
            _ => {
                let want = if self.variant == Variant::Concat { 2 * self.embedding_dim } else { self.embedding_dim };
                !self.layers.is_empty()
                    && self.input_dim == want
                    && self.layers[0].cols == want
                    && self.layers.windows(2).all(|w| w[1].cols == w[0].rows)
                    && self.layers.last().is_some_and(|l| l.rows == 1)
            }
        };
        if !widths_ok {
            return bad("layer widths do not fit the variant".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} outside (0, 1)", self.threshold));
        }
        Ok(())
    }
}

/// `(cos(u, v), |u|, |v|)`, with the cosine 0 for a degenerate vector.
fn cosine_parts(u: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu < NORM_EPS || nv < NORM_EPS {
        return (0.0, nu, nv);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (nu * nv), nu, nv)
}

/// Binary cross entropy of `sigmoid(z)` against `y`, stable for large `|z|`.
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(variant: Variant, seed: u64) -> AlignmentModel {
        AlignmentModel::init(
            variant,
            8,
            &ModelShape {
                hidden: vec![4, 3],
                projection: 5,
            },
            seed,
            "test",
        )
    }

    #[test]
    fn input_widths_follow_the_variant() {
        let shape = ModelShape::default();
        let m = AlignmentModel::init(Variant::Concat, 64, &shape, 0, "p");
        assert_eq!((m.input_dim, m.layers[0].cols, m.layers[0].rows), (128, 128, 256));
        assert_eq!(m.layers.iter().map(|l| l.rows).collect::<Vec<_>>(), vec![256, 64, 1]);
        assert_eq!(AlignmentModel::init(Variant::Joint, 64, &shape, 0, "p").input_dim, 64);
        let c = AlignmentModel::init(Variant::CosineProjection, 64, &shape, 0, "p");
        assert_eq!(c.layers[0].rows, c.layers[1].rows);
        assert_eq!(c.layers[0].rows, 128);
    }

    #[test]
    fn dimension_mismatch() {
        let m = small(Variant::Joint, 0);
        assert!(matches!(
            m.probability(&[0.0; 8], &[0.0; 7]),
            Err(AlignError::DimensionMismatch { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn bce_matches_the_direct_formula() {
        for (z, y) in [(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0), (-1.5, 1.0)] {
            let p = 1.0 / (1.0 + f64::exp(-z));
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(z, y) - direct).abs() < 1e-12);
        }
        assert!(bce_with_logit(800.0, 0.0).is_finite());
    }

    #[test]
    fn zero_weights_give_the_closed_form_bias_gradient() {
        for variant in [Variant::Concat, Variant::Joint] {
            let mut m = small(variant, 1);
            for l in &mut m.layers {
                l.weights.iter_mut().for_each(|w| *w = 0.0);
            }
            let q: Vec<f64> = (0..8).map(|i| i as f64 / 3.0).collect();
            for y in [0.0, 1.0] {
                let (_, g) = m.backward(&q, &q, y).unwrap();
                assert!((g.last().unwrap().b[0] - (0.5 - y)).abs() < 1e-15);
                assert!(g[..g.len() - 1].iter().all(|lg| lg.w.iter().chain(&lg.b).all(|v| *v == 0.0)));
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        for v in Variant::ALL {
            let m = small(v, 2);
            m.save(&path).unwrap();
            assert_eq!(AlignmentModel::load(&path).unwrap(), m);
        }
        let mut broken = small(Variant::Concat, 2);
        broken.layers[1].cols += 1;
        broken.save(&path).unwrap();
        assert!(matches!(AlignmentModel::load(&path), Err(AlignError::ModelFormat(_))));
    }

    proptest! {
        #[test]
        fn untrained_scores_lie_strictly_inside_the_unit_interval(
            seed in any::<u64>(),
            q in prop::collection::vec(-5.0f64..5.0, 8),
            c in prop::collection::vec(-5.0f64..5.0, 8),
        ) {
            for v in Variant::ALL {
                let p = small(v, seed).probability(&q, &c).unwrap();
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }

        #[test]
        fn hidden_unit_permutation_leaves_scores_unchanged(
            seed in any::<u64>(),
            perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
            q in prop::collection::vec(-3.0f64..3.0, 8),
            c in prop::collection::vec(-3.0f64..3.0, 8),
        ) {
            let m = small(Variant::Concat, seed);
            let mut p = m.clone();
            let (l0, l1) = (&m.layers[0], &m.layers[1]);
            for (new, &old) in perm.iter().enumerate() {
                let w = &l0.weights[old * l0.cols..(old + 1) * l0.cols];
                p.layers[0].weights[new * l0.cols..(new + 1) * l0.cols].copy_from_slice(w);
                p.layers[0].bias[new] = l0.bias[old];
                for r in 0..l1.rows {
                    p.layers[1].weights[r * l1.cols + new] = l1.weights[r * l1.cols + old];
                }
            }
            let a = m.logit(&q, &c).unwrap();
            let b = p.logit(&q, &c).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
