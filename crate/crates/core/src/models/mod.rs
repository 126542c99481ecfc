//! Probability-scoring binary classifiers and their hyperparameter spaces.

mod forest;
mod knn;
mod logistic;
mod naive_bayes;
mod space;
mod tree;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

pub use forest::{bootstrap_rows, RandomForest};
pub use knn::Knn;
pub use logistic::{logistic_gradient, logistic_loss, LogisticRegression};
pub use naive_bayes::GaussianNb;
pub use space::HyperparamSpace;
pub use tree::{BinnedMatrix, DecisionTree, TreeParams};

/// Smallest training set accepted by [`train`].
pub const MIN_TRAIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    LogisticRegression,
    DecisionTree,
    RandomForest,
    GaussianNb,
    Knn,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [
        ModelId::LogisticRegression,
        ModelId::DecisionTree,
        ModelId::RandomForest,
        ModelId::GaussianNb,
        ModelId::Knn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::LogisticRegression => "logistic_regression",
            ModelId::DecisionTree => "decision_tree",
            ModelId::RandomForest => "random_forest",
            ModelId::GaussianNb => "gaussian_nb",
            ModelId::Knn => "knn",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFraction {
    Sqrt,
    Half,
    Full,
}

impl FeatureFraction {
    pub fn n_features(&self, total: usize) -> usize {
        let n = match self {
            FeatureFraction::Sqrt => (total as f64).sqrt().round() as usize,
            FeatureFraction::Half => total.div_ceil(2),
            FeatureFraction::Full => total,
        };
        n.clamp(1, total.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeighting {
    Uniform,
    InverseDistance,
}

/// A model family with concrete hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    LogisticRegression {
        l2: f64,
        epochs: u32,
        learning_rate: f64,
    },
    DecisionTree {
        max_depth: u32,
        min_leaf: u32,
    },
    RandomForest {
        n_trees: u32,
        max_depth: u32,
        feature_fraction: FeatureFraction,
    },
    GaussianNb {
        var_smoothing: f64,
    },
    Knn {
        k: u32,
        weighting: KnnWeighting,
    },
}

impl ModelSpec {
    pub fn model_id(&self) -> ModelId {
        match self {
            ModelSpec::LogisticRegression { .. } => ModelId::LogisticRegression,
            ModelSpec::DecisionTree { .. } => ModelId::DecisionTree,
            ModelSpec::RandomForest { .. } => ModelId::RandomForest,
            ModelSpec::GaussianNb { .. } => ModelId::GaussianNb,
            ModelSpec::Knn { .. } => ModelId::Knn,
        }
    }
}

#[derive(Debug, Clone)]
enum Learned {
    Logistic(LogisticRegression),
    Tree(DecisionTree),
    Forest(RandomForest),
    NaiveBayes(GaussianNb),
    Knn(Knn),
}

/// A trained classifier plus training metadata.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub n_rows: usize,
    pub n_features: usize,
    pub wall_seconds: f64,
    /// False when an iterative fit stopped before reaching its tolerance.
    pub converged: bool,
    learned: Learned,
}

impl FittedModel {
    pub fn model_id(&self) -> ModelId {
        self.spec.model_id()
    }

    /// Positive-class scores in [0, 1].
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::Contract(format!(
                "model trained on {} columns, got {}",
                self.n_features,
                x.cols()
            )));
        }
        let scores = match &self.learned {
            Learned::Logistic(m) => m.predict_scores(x),
            Learned::Tree(m) => m.predict_scores(x),
            Learned::Forest(m) => m.predict_scores(x),
            Learned::NaiveBayes(m) => m.predict_scores(x),
            Learned::Knn(m) => m.predict_scores(x),
        };
        Ok(scores)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(crate::metrics::hard_predictions(&self.predict_scores(x)?))
    }
}

/// Trains `spec` on `(x, y)`. The result depends only on the inputs and
/// `seed`.
pub fn train(spec: &ModelSpec, x: &Matrix, y: &[u8], seed: u64) -> Result<FittedModel> {
    if x.rows() != y.len() {
        return Err(Error::Contract(format!(
            "{} rows for {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < MIN_TRAIN_ROWS {
        return Err(Error::Training(format!(
            "{} training rows, need at least {MIN_TRAIN_ROWS}",
            x.rows()
        )));
    }
    let positives = y.iter().filter(|&&v| v != 0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Training("training set has a single class".into()));
    }
    if x.cols() == 0 {
        return Err(Error::Training("no feature columns".into()));
    }
    HyperparamSpace::default().check(spec)?;

    let start = Instant::now();
    let mut converged = true;
    let learned = match *spec {
        ModelSpec::LogisticRegression {
            l2,
            epochs,
            learning_rate,
        } => {
            let m = LogisticRegression::fit(x, y, l2, epochs, learning_rate);
            converged = m.converged();
            Learned::Logistic(m)
        }
        ModelSpec::DecisionTree {
            max_depth,
            min_leaf,
        } => Learned::Tree(DecisionTree::fit(
            x,
            y,
            TreeParams {
                max_depth: max_depth as usize,
                min_leaf: min_leaf as usize,
                max_features: None,
            },
            seed,
        )),
        ModelSpec::RandomForest {
            n_trees,
            max_depth,
            feature_fraction,
        } => Learned::Forest(RandomForest::fit(
            x,
            y,
            n_trees as usize,
            max_depth as usize,
            feature_fraction,
            seed,
        )),
        ModelSpec::GaussianNb { var_smoothing } => {
            Learned::NaiveBayes(GaussianNb::fit(x, y, var_smoothing))
        }
        ModelSpec::Knn { k, weighting } => Learned::Knn(Knn::fit(x, y, k as usize, weighting)),
    };
    Ok(FittedModel {
        spec: *spec,
        n_rows: x.rows(),
        n_features: x.cols(),
        wall_seconds: start.elapsed().as_secs_f64(),
        converged,
        learned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn separable(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = rng::rng_from(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let shift = if label == 1 { 1.5 } else { -1.5 };
            rows.push(vec![
                shift + rng.gen_range(-1.0..1.0),
                shift + rng.gen_range(-1.0..1.0),
            ]);
            y.push(label);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn all_specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::LogisticRegression {
                l2: 1e-4,
                epochs: 200,
                learning_rate: 0.5,
            },
            ModelSpec::DecisionTree {
                max_depth: 6,
                min_leaf: 1,
            },
            ModelSpec::RandomForest {
                n_trees: 16,
                max_depth: 6,
                feature_fraction: FeatureFraction::Sqrt,
            },
            ModelSpec::GaussianNb {
                var_smoothing: 1e-9,
            },
            ModelSpec::Knn {
                k: 5,
                weighting: KnnWeighting::Uniform,
            },
        ]
    }

    #[test]
    fn every_model_separates_separable_data() {
        let (x, y) = separable(60, 1);
        for spec in all_specs() {
            let m = train(&spec, &x, &y, 3).unwrap();
            let preds = m.predict(&x).unwrap();
            assert_eq!(preds, y, "{}", spec.model_id());
            let scores = m.predict_scores(&x).unwrap();
            assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn constant_features_predict_majority() {
        let x = Matrix::new(vec![0.0; 40], 20, 2).unwrap();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i < 6)).collect();
        for spec in all_specs() {
            let m = train(&spec, &x, &y, 0).unwrap();
            assert!(
                m.predict(&x).unwrap().iter().all(|&p| p == 0),
                "{}",
                spec.model_id()
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = separable(80, 2);
        for spec in all_specs() {
            let a = train(&spec, &x, &y, 11).unwrap().predict_scores(&x).unwrap();
            let b = train(&spec, &x, &y, 11).unwrap().predict_scores(&x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_class_and_tiny_sets_fail() {
        let (x, _) = separable(20, 3);
        let spec = all_specs()[0];
        assert!(matches!(train(&spec, &x, &[1; 20], 0), Err(Error::Training(_))));
        let small = x.select_rows(&[0, 1, 2]);
        assert!(matches!(train(&spec, &small, &[0, 1, 0], 0), Err(Error::Training(_))));
    }

    #[test]
    fn arity_mismatch_is_contract_error() {
        let (x, y) = separable(20, 4);
        let m = train(&all_specs()[1], &x, &y, 0).unwrap();
        let wide = Matrix::zeros(2, 3);
        assert!(matches!(m.predict_scores(&wide), Err(Error::Contract(_))));
    }

    #[test]
    fn out_of_space_spec_rejected() {
        let (x, y) = separable(20, 5);
        let spec = ModelSpec::DecisionTree {
            max_depth: 40,
            min_leaf: 1,
        };
        assert!(matches!(train(&spec, &x, &y, 0), Err(Error::Config(_))));
    }
}
