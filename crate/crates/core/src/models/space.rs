use rand::seq::SliceRandom;
use rand::Rng;

use super::{FeatureFraction, KnnWeighting, ModelId, ModelSpec};
use crate::error::{Error, Result};

/// Bounds of every model's hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparamSpace {
    pub lr_l2: (f64, f64),
    pub lr_epochs: Vec<u32>,
    pub lr_learning_rate: (f64, f64),
    pub tree_max_depth: (u32, u32),
    pub tree_min_leaf: (u32, u32),
    pub forest_trees: (u32, u32),
    pub forest_max_depth: (u32, u32),
    pub nb_var_smoothing: (f64, f64),
    pub knn_k: (u32, u32),
}

impl Default for HyperparamSpace {
    fn default() -> Self {
        Self {
            lr_l2: (1e-4, 10.0),
            lr_epochs: vec![50, 100, 200],
            lr_learning_rate: (1e-3, 0.5),
            tree_max_depth: (2, 16),
            tree_min_leaf: (1, 32),
            forest_trees: (8, 128),
            forest_max_depth: (2, 16),
            nb_var_smoothing: (1e-9, 1e-3),
            knn_k: (1, 31),
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp().clamp(lo, hi)
}

fn within<T: PartialOrd + std::fmt::Debug>(name: &str, v: T, (lo, hi): (T, T)) -> Result<()> {
    if v < lo || v > hi {
        return Err(Error::Config(format!(
            "{name} = {v:?} outside [{lo:?}, {hi:?}]"
        )));
    }
    Ok(())
}

impl HyperparamSpace {
    /// Uniform over model families, then each hyperparameter from its range.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelSpec {
        let id = *ModelId::ALL.choose(rng).unwrap();
        self.sample_for(id, rng)
    }

    pub fn sample_for<R: Rng + ?Sized>(&self, id: ModelId, rng: &mut R) -> ModelSpec {
        match id {
            ModelId::LogisticRegression => ModelSpec::LogisticRegression {
                l2: log_uniform(rng, self.lr_l2),
                epochs: *self.lr_epochs.choose(rng).unwrap(),
                learning_rate: log_uniform(rng, self.lr_learning_rate),
            },
            ModelId::DecisionTree => ModelSpec::DecisionTree {
                max_depth: rng.gen_range(self.tree_max_depth.0..=self.tree_max_depth.1),
                min_leaf: rng.gen_range(self.tree_min_leaf.0..=self.tree_min_leaf.1),
            },
            ModelId::RandomForest => ModelSpec::RandomForest {
                n_trees: rng.gen_range(self.forest_trees.0..=self.forest_trees.1),
                max_depth: rng.gen_range(self.forest_max_depth.0..=self.forest_max_depth.1),
                feature_fraction: *[
                    FeatureFraction::Sqrt,
                    FeatureFraction::Half,
                    FeatureFraction::Full,
                ]
                .choose(rng)
                .unwrap(),
            },
            ModelId::GaussianNb => ModelSpec::GaussianNb {
                var_smoothing: log_uniform(rng, self.nb_var_smoothing),
            },
            ModelId::Knn => {
                let odd = self.knn_k.0.div_ceil(2)..=self.knn_k.1.div_ceil(2);
                ModelSpec::Knn {
                    k: 2 * rng.gen_range(odd) - 1,
                    weighting: *[KnnWeighting::Uniform, KnnWeighting::InverseDistance]
                        .choose(rng)
                        .unwrap(),
                }
            }
        }
    }

    /// Errors when any hyperparameter lies outside its declared range.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        match *spec {
            ModelSpec::LogisticRegression {
                l2,
                epochs,
                learning_rate,
            } => {
                within("l2", l2, self.lr_l2)?;
                within("learning_rate", learning_rate, self.lr_learning_rate)?;
                if !self.lr_epochs.contains(&epochs) {
                    return Err(Error::Config(format!("epochs = {epochs} not in {:?}", self.lr_epochs)));
                }
            }
            ModelSpec::DecisionTree {
                max_depth,
                min_leaf,
            } => {
                within("max_depth", max_depth, self.tree_max_depth)?;
                within("min_leaf", min_leaf, self.tree_min_leaf)?;
            }
            ModelSpec::RandomForest {
                n_trees, max_depth, ..
            } => {
                within("n_trees", n_trees, self.forest_trees)?;
                within("max_depth", max_depth, self.forest_max_depth)?;
            }
            ModelSpec::GaussianNb { var_smoothing } => {
                within("var_smoothing", var_smoothing, self.nb_var_smoothing)?;
            }
            ModelSpec::Knn { k, .. } => {
                within("k", k, self.knn_k)?;
                if k % 2 == 0 {
                    return Err(Error::Config(format!("k = {k} must be odd")));
                }
            }
        }
        Ok(())
    }
}
