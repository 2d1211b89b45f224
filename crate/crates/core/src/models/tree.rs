//! CART classification tree with Gini impurity.
//!
//! Thresholds sit at midpoints between consecutive distinct values and a
//! row goes left when `x[feature] <= threshold`. Split scores depend only
//! on class counts, so the fitted tree does not depend on row order.
//! Ties go to the lowest feature index, then the lowest threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::matrix::Matrix;
use crate::preprocess::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_gini_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_gini_decrease: 0.0,
        }
    }
}

/// `1 - p0² - p1²`.
pub fn gini_impurity(counts: [usize; 2]) -> Result<f64> {
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(CrlError::EmptyNode);
    }
    let (p0, p1) = (counts[0] as f64 / n as f64, counts[1] as f64 / n as f64);
    Ok(1.0 - p0 * p0 - p1 * p1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes stored flat; index 0 is the root and children are node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn leaf_for(&self, x: &[f64]) -> [usize; 2] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Majority label (ties → 0) and the fraction of class 1 in the leaf.
    pub fn predict(&self, x: &[f64]) -> (u8, f64) {
        let c = self.leaf_for(x);
        let total = (c[0] + c[1]).max(1) as f64;
        (u8::from(c[1] > c[0]), c[1] as f64 / total)
    }

    pub fn depth(&self) -> usize {
        let mut stack = vec![(0usize, 0usize)];
        let mut deepest = 0;
        while let Some((at, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let TreeNode::Split { left, right, .. } = &self.nodes[at] {
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        deepest
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Distinct features used by any split, ascending.
    pub fn features_used(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// How candidate features are chosen at each node.
pub(crate) enum FeatureSampler<'r, R: Rng> {
    All,
    /// Draw features in random order until `k` non-constant ones were
    /// evaluated (or none are left).
    Random {
        k: usize,
        rng: &'r mut R,
    },
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl Candidate {
    /// Higher decrease wins; ties by lower feature, then lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        if self.decrease != other.decrease {
            return self.decrease > other.decrease;
        }
        if self.feature != other.feature {
            return self.feature < other.feature;
        }
        self.threshold < other.threshold
    }
}

fn counts_of(labels: &[u8], idx: &[usize]) -> [usize; 2] {
    let mut c = [0usize; 2];
    for &i in idx {
        c[labels[i] as usize] += 1;
    }
    c
}

fn sum_sq_over_n(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    ((c[0] * c[0] + c[1] * c[1]) as f64) / n
}

/// Best threshold on one feature, or `None` if the feature is constant here.
fn best_on_feature(
    x: &Matrix,
    labels: &[u8],
    idx: &[usize],
    feature: usize,
    parent: [usize; 2],
    scratch: &mut Vec<(f64, u8)>,
) -> Option<Candidate> {
    scratch.clear();
    scratch.extend(idx.iter().map(|&i| (x.get(i, feature), labels[i])));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    if scratch[0].0 == scratch[scratch.len() - 1].0 {
        return None;
    }
    let n = idx.len() as f64;
    let parent_gini = 1.0 - sum_sq_over_n(parent) / n;
    let mut left = [0usize; 2];
    let mut best: Option<Candidate> = None;
    for k in 0..scratch.len() - 1 {
        left[scratch[k].1 as usize] += 1;
        let (v, next) = (scratch[k].0, scratch[k + 1].0);
        if v == next {
            continue;
        }
        let right = [parent[0] - left[0], parent[1] - left[1]];
        // weighted child impurity = 1 - (Σ l²/nl + Σ r²/nr) / n
        let child = 1.0 - (sum_sq_over_n(left) + sum_sq_over_n(right)) / n;
        let mut threshold = 0.5 * (v + next);
        if threshold >= next {
            threshold = v;
        }
        let cand = Candidate {
            feature,
            threshold,
            decrease: parent_gini - child,
        };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best
}

pub(crate) fn grow<R: Rng>(
    x: &Matrix,
    labels: &[u8],
    rows: Vec<usize>,
    hp: &TreeParams,
    mut sampler: FeatureSampler<'_, R>,
) -> TreeModel {
    let d = x.n_cols();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut scratch = Vec::with_capacity(rows.len());
    let mut order: Vec<usize> = (0..d).collect();
    // (slot, rows, depth); slot is the index reserved for this node
    nodes.push(TreeNode::Leaf { counts: [0, 0] });
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((slot, idx, depth)) = stack.pop() {
        let counts = counts_of(labels, &idx);
        let n = idx.len();
        let stop = counts[0] == 0
            || counts[1] == 0
            || hp.max_depth.is_some_and(|m| depth >= m)
            || n < hp.min_samples_split.max(2);
        if stop {
            nodes[slot] = TreeNode::Leaf { counts };
            continue;
        }

        let mut best: Option<Candidate> = None;
        let mut consider = |f: usize, best: &mut Option<Candidate>| -> bool {
            match best_on_feature(x, labels, &idx, f, counts, &mut scratch) {
                Some(c) => {
                    if best.as_ref().is_none_or(|b| c.beats(b)) {
                        *best = Some(c);
                    }
                    true
                }
                None => false,
            }
        };
        match &mut sampler {
            FeatureSampler::All => {
                for f in 0..d {
                    consider(f, &mut best);
                }
            }
            FeatureSampler::Random { k, rng } => {
                let mut evaluated = 0;
                for i in 0..d {
                    if evaluated >= *k {
                        break;
                    }
                    let j = rng.gen_range(i..d);
                    order.swap(i, j);
                    if consider(order[i], &mut best) {
                        evaluated += 1;
                    }
                }
            }
        }

        match best {
            Some(c) if c.decrease >= hp.min_gini_decrease => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| x.get(i, c.feature) <= c.threshold);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                let right = nodes.len();
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                nodes[slot] = TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                stack.push((right, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
            _ => nodes[slot] = TreeNode::Leaf { counts },
        }
    }
    TreeModel {
        n_features: d,
        nodes,
    }
}

/// Fits a tree on every row, scanning all features at each node.
pub fn train_tree(data: &DesignMatrix, hp: &TreeParams) -> Result<TreeModel> {
    if data.n_rows() == 0 {
        return Err(CrlError::EmptyDataset);
    }
    if data.labels.iter().any(|&l| l > 1) {
        return Err(CrlError::NonBinaryLabels);
    }
    let rows = (0..data.n_rows()).collect();
    Ok(grow::<rand_chacha::ChaCha8Rng>(
        &data.features,
        &data.labels,
        rows,
        hp,
        FeatureSampler::All,
    ))
}
