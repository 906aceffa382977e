use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyper {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `sqrt(d)`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestHyper {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        genuine: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flattened decision tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn votes_genuine(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { genuine } => return genuine,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub input_dim: usize,
}

impl Classifier for RandomForest {
    fn name(&self) -> &'static str {
        "rf"
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Fraction of trees voting genuine.
    fn score(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.votes_genuine(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [bool],
    hyper: &'a ForestHyper,
    mtry: usize,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        self.nodes.push(TreeNode::Leaf {
            genuine: pos * 2 > idx.len(),
        });
        self.nodes.len() - 1
    }

    /// Best split among `mtry` random features: (feature, threshold, left size).
    fn best_split(&self, idx: &mut [usize], rng: &mut StreamRng) -> Option<(usize, f64)> {
        let dim = self.rows[0].len();
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.labels[i]).count();
        let mut features: Vec<usize> = (0..dim).collect();
        // partial Fisher-Yates
        for k in 0..self.mtry {
            let j = rng.random_range(k..dim);
            features.swap(k, j);
        }
        let min_leaf = self.hyper.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features[..self.mtry] {
            idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            let mut left_pos = 0;
            for split in 1..n {
                if self.labels[idx[split - 1]] {
                    left_pos += 1;
                }
                if split < min_leaf || n - split < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.rows[idx[split - 1]][f], self.rows[idx[split]][f]);
                if lo == hi {
                    continue;
                }
                let impurity = (split as f64 * gini(left_pos, split)
                    + (n - split) as f64 * gini(total_pos - left_pos, n - split))
                    / n as f64;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut StreamRng) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        let pure = pos == 0 || pos == idx.len();
        if pure || depth >= self.hyper.max_depth || idx.len() < 2 * self.hyper.min_leaf.max(1) {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx, rng) else {
            return self.leaf(idx);
        };
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { genuine: false });
        let mut left: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.rows[i][feature] <= threshold)
            .collect();
        let mut right: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.rows[i][feature] > threshold)
            .collect();
        let l = self.grow(&mut left, depth + 1, rng);
        let r = self.grow(&mut right, depth + 1, rng);
        self.nodes[at] = TreeNode::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        at
    }
}

fn build_tree(rows: &[Vec<f64>], labels: &[bool], hyper: &ForestHyper, mtry: usize, seed: u64) -> Tree {
    let mut r = rng::stream(seed, &[]);
    let n = rows.len();
    let mut idx: Vec<usize> = if hyper.bootstrap {
        (0..n).map(|_| r.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        rows,
        labels,
        hyper,
        mtry,
        nodes: Vec::new(),
    };
    b.grow(&mut idx, 0, &mut r);
    Tree { nodes: b.nodes }
}

/// Bootstrap-sampled Gini trees. Each tree draws from its own RNG stream, so
/// the result does not depend on the thread schedule.
pub fn train_random_forest(rows: &[Vec<f64>], labels: &[bool], hyper: &ForestHyper, seed: u64) -> Result<RandomForest> {
    let dim = check_training_set(rows, labels)?;
    if hyper.trees == 0 || hyper.max_depth == 0 {
        return Err(Error::invalid("forest needs at least one tree and depth >= 1"));
    }
    let mtry = hyper
        .max_features
        .unwrap_or_else(|| (dim as f64).sqrt().round() as usize)
        .clamp(1, dim);
    let trees = (0..hyper.trees)
        .into_par_iter()
        .map(|t| build_tree(rows, labels, hyper, mtry, rng::derive_seed(seed, &[0xF0, t as u64])))
        .collect();
    Ok(RandomForest { trees, input_dim: dim })
}
