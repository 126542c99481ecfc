use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{BinnedMatrix, DecisionTree, TreeParams};
use super::FeatureFraction;
use crate::data::Matrix;
use crate::rng::{self, Rng};

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_rows(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Bagged CART trees with per-split feature subsampling. Scores are the mean
/// of the tree scores.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(
        x: &Matrix,
        y: &[u8],
        n_trees: usize,
        max_depth: usize,
        feature_fraction: FeatureFraction,
        seed: u64,
    ) -> Self {
        let binned = BinnedMatrix::new(x);
        let params = TreeParams {
            max_depth,
            min_leaf: 1,
            max_features: Some(feature_fraction.n_features(x.cols())),
        };
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let rows = bootstrap_rows(x.rows(), &mut rng::derived_rng(seed, &[t as u64, 0]));
                let tree_seed = rng::derive_seed(seed, &[t as u64, 1]);
                DecisionTree::fit_on_rows(&binned, y, rows, params, tree_seed)
            })
            .collect();
        Self { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        (0..x.rows())
            .map(|r| {
                let row = x.row(r);
                self.trees.iter().map(|t| t.score_row(row)).sum::<f64>() / k
            })
            .collect()
    }
}
