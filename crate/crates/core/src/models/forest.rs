//! Bagged CART trees with per-split feature subsampling.
//!
//! Tree `t` draws everything (bootstrap rows, then split features) from a
//! ChaCha stream keyed by `(seed, t)`, so the fitted forest is the same no
//! matter how many worker threads train it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, FeatureSampler, TreeModel, TreeParams};
use crate::error::{CrlError, Result};
use crate::preprocess::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(&self, d: usize) -> usize {
        match *self {
            FeaturesPerSplit::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::All => d,
            FeaturesPerSplit::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            seed: 42,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    /// Resolved number of features drawn per split.
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
    /// Features each tree actually split on, ascending.
    pub features_used: Vec<Vec<usize>>,
}

impl ForestModel {
    /// Fraction of trees voting 1; label is 1 when that fraction is ≥ 0.5.
    pub fn predict(&self, x: &[f64]) -> (u8, f64) {
        let votes = self.trees.iter().filter(|t| t.predict(x).0 == 1).count();
        let score = votes as f64 / self.trees.len() as f64;
        (u8::from(score >= 0.5), score)
    }
}

fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// Trains on the current rayon pool; wrap in `ThreadPool::install` to pick
/// the worker count.
pub fn train_forest(data: &DesignMatrix, hp: &ForestParams) -> Result<ForestModel> {
    let n = data.n_rows();
    if n == 0 {
        return Err(CrlError::EmptyDataset);
    }
    if hp.n_trees == 0 {
        return Err(CrlError::Config("forest needs at least one tree".into()));
    }
    if data.labels.iter().any(|&l| l > 1) {
        return Err(CrlError::NonBinaryLabels);
    }
    let d = data.n_features();
    let k = hp.features_per_split.resolve(d);
    let trees: Vec<TreeModel> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(hp.seed, t);
            let rows: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampler = if k >= d {
                FeatureSampler::All
            } else {
                FeatureSampler::Random { k, rng: &mut rng }
            };
            grow(&data.features, &data.labels, rows, &hp.tree, sampler)
        })
        .collect();
    let features_used = trees.iter().map(TreeModel::features_used).collect();
    Ok(ForestModel {
        trees,
        features_per_split: k,
        bootstrap: hp.bootstrap,
        seed: hp.seed,
        features_used,
    })
}
