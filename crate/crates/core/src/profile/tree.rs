//! Binary CART classifier grown by Gini impurity minimization.

use serde::{Deserialize, Serialize};

use super::features::{FEATURE_NAMES, FEATURE_SCHEMA_VERSION};
use super::ProfileError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_samples_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Samples with `x[feature_index] <= threshold` go left.
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { class_probabilities: [f64; 2] },
}

/// A trained tree. Serializes to the versioned model-file layout
/// `{schema_version, feature_names, params, nodes}`; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub params: TreeParams,
    pub nodes: Vec<TreeNode>,
}

pub type Sample = (Vec<f64>, u8);

fn gini(neg: usize, pos: usize) -> f64 {
    let n = (neg + pos) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (neg as f64 / n, pos as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted: f64,
}

struct Grower<'a> {
    data: &'a [Sample],
    params: TreeParams,
    n_features: usize,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn leaf(&mut self, neg: usize, pos: usize) -> usize {
        let n = (neg + pos) as f64;
        self.nodes.push(TreeNode::Leaf {
            class_probabilities: [neg as f64 / n, pos as f64 / n],
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, idx: &[usize], parent: f64) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let total_pos = idx.iter().filter(|&&i| self.data[i].1 == 1).count();
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in 0..self.n_features {
            order.sort_by(|&a, &b| self.data[a].0[f].total_cmp(&self.data[b].0[f]).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.data[order[k]].1 == 1 {
                    left_pos += 1;
                }
                let (x, next) = (self.data[order[k]].0[f], self.data[order[k + 1]].0[f]);
                let n_left = k + 1;
                let n_right = n - n_left;
                if x == next || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let gl = gini(n_left - left_pos, left_pos);
                let gr = gini(n_right - (total_pos - left_pos), total_pos - left_pos);
                let weighted = (n_left as f64 * gl + n_right as f64 * gr) / n as f64;
                if weighted >= parent - 1e-12 {
                    continue;
                }
                if best.as_ref().is_none_or(|b| weighted < b.weighted - 1e-12) {
                    let mid = x + (next - x) / 2.0;
                    let threshold = if mid < next { mid } else { x };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        weighted,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.data[i].1 == 1).count();
        let neg = idx.len() - pos;
        if depth >= self.params.max_depth || pos == 0 || neg == 0 || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return self.leaf(neg, pos);
        }
        let Some(split) = self.best_split(idx, gini(neg, pos)) else {
            return self.leaf(neg, pos);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.data[i].0[split.feature] <= split.threshold);
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            class_probabilities: [0.0, 0.0],
        });
        let l = self.grow(&left, depth + 1);
        let r = self.grow(&right, depth + 1);
        self.nodes[me] = TreeNode::Split {
            feature_index: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        me
    }
}

/// Grows a tree over `dataset`. A split is made only when it lowers the
/// size-weighted Gini impurity of the node; equal-quality splits
/// resolve to the lower feature index, then the lower threshold.
pub fn train_tree(dataset: &[Sample], params: TreeParams) -> Result<DecisionTree, ProfileError> {
    train_tree_named(dataset, params, FEATURE_NAMES.iter().map(|s| s.to_string()).collect())
}

/// As [`train_tree`], for datasets with a custom feature layout.
pub fn train_tree_named(
    dataset: &[Sample],
    params: TreeParams,
    feature_names: Vec<String>,
) -> Result<DecisionTree, ProfileError> {
    let Some(first) = dataset.first() else {
        return Err(ProfileError::EmptyDataset);
    };
    let n_features = first.0.len();
    for (i, (x, y)) in dataset.iter().enumerate() {
        if x.len() != n_features {
            return Err(ProfileError::InconsistentFeatures {
                row: i,
                expected: n_features,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ProfileError::NonFiniteFeature { row: i });
        }
        if *y > 1 {
            return Err(ProfileError::BadLabel { row: i, label: *y });
        }
    }
    if feature_names.len() != n_features {
        return Err(ProfileError::InconsistentFeatures {
            row: 0,
            expected: feature_names.len(),
            found: n_features,
        });
    }
    let mut grower = Grower {
        data: dataset,
        params,
        n_features,
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..dataset.len()).collect();
    grower.grow(&all, 0);
    Ok(DecisionTree {
        schema_version: FEATURE_SCHEMA_VERSION,
        feature_names,
        params,
        nodes: grower.nodes,
    })
}

impl DecisionTree {
    /// Probability of the positive class.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { class_probabilities } => return class_probabilities[1],
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature_index] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) > 0.5)
    }

    pub fn accuracy(&self, data: &[Sample]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data.iter().filter(|(x, y)| self.predict(x) == *y).count();
        hits as f64 / data.len() as f64
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ProfileError> {
        let tree: DecisionTree = serde_json::from_str(s).map_err(|e| ProfileError::ModelFile(e.to_string()))?;
        if tree.nodes.is_empty() {
            return Err(ProfileError::ModelFile("tree has no nodes".into()));
        }
        Ok(tree)
    }
}

/// Reads training data: a header naming the feature columns plus a final
/// `label` column of 0/1 values.
pub fn load_training_csv(text: &str) -> Result<(Vec<String>, Vec<Sample>), ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| ProfileError::TrainingData(e.to_string()))?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| ProfileError::TrainingData("no `label` column".into()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ProfileError::TrainingData(e.to_string()))?;
        let mut x = Vec::with_capacity(names.len());
        let mut y = None;
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| ProfileError::TrainingData(format!("row {row}: `{field}` is not numeric")))?;
            if i == label_col {
                y = Some(if v == 1.0 {
                    1
                } else if v == 0.0 {
                    0
                } else {
                    return Err(ProfileError::BadLabel { row, label: v as u8 });
                });
            } else {
                x.push(v);
            }
        }
        let y = y.ok_or_else(|| ProfileError::TrainingData(format!("row {row} has no label")))?;
        out.push((x, y));
    }
    Ok((names, out))
}
