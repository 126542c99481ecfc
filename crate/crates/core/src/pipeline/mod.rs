//! Pipeline genomes, data selection, and single-genome fitness evaluation.

mod genome;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{stratified_subsample, Encoder, Matrix, TabularDataset};
use crate::error::{Error, Result};
use crate::fairness::{build_subgroups, fairness_bundle, FairnessBundle, SubgroupIndex};
use crate::metrics::{performance_bundle, PerformanceBundle};
use crate::models;

pub use genome::{
    crossover, mutate, random_genome, DrMode, PipelineGenome, MIN_INSTANCE_FRACTION, N_GENES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// Performance component only.
    Baseline,
    /// `alpha * performance + (1 - alpha) * fairness`.
    FairnessAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessConfig {
    pub alpha: f64,
    pub mode: FitnessMode,
}

impl FitnessConfig {
    pub const DEFAULT_ALPHA: f64 = 0.8;

    pub fn baseline() -> Self {
        Self {
            alpha: Self::DEFAULT_ALPHA,
            mode: FitnessMode::Baseline,
        }
    }

    pub fn fairness_aware(alpha: f64) -> Self {
        Self {
            alpha,
            mode: FitnessMode::FairnessAware,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    /// Scalar fitness to minimise.
    pub fn fitness(&self, performance: f64, fairness: f64) -> f64 {
        match self.mode {
            FitnessMode::Baseline => performance,
            FitnessMode::FairnessAware => self.alpha * performance + (1.0 - self.alpha) * fairness,
        }
    }
}

/// Outcome of evaluating one genome on one train/evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub fairness: FairnessBundle,
    pub performance: PerformanceBundle,
    pub fitness: f64,
    pub instances_frac: f64,
    pub features_frac: f64,
    /// Positive rows among the selected training rows, in percent.
    pub positive_pct: f64,
    /// Sensitive columns among the selected columns, in percent.
    pub sensitives_pct: f64,
    pub eval_seconds: f64,
    pub error: Option<String>,
}

impl FitnessReport {
    pub fn failed(message: String, usage: DataUsage, eval_seconds: f64) -> Self {
        Self {
            fairness: FairnessBundle::worst(),
            performance: PerformanceBundle::worst(),
            fitness: 1.0,
            instances_frac: usage.instances_frac,
            features_frac: usage.features_frac,
            positive_pct: usage.positive_pct,
            sensitives_pct: usage.sensitives_pct,
            eval_seconds,
            error: Some(message),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }

    /// Copy with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            eval_seconds: 0.0,
            ..self.clone()
        }
    }

    pub fn data_usage(&self) -> f64 {
        self.instances_frac + self.features_frac
    }
}

/// Data-usage accounting for a selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataUsage {
    pub instances_frac: f64,
    pub features_frac: f64,
    pub positive_pct: f64,
    pub sensitives_pct: f64,
}

/// Training data encoded with statistics from the training rows, plus the
/// encoded evaluation rows and their subgroups.
#[derive(Debug, Clone)]
pub struct EvaluationContext {
    train_rows: Vec<usize>,
    train_x: Matrix,
    train_y: Vec<u8>,
    eval_rows: Vec<usize>,
    eval_x: Matrix,
    eval_y: Vec<u8>,
    column_origin: Vec<usize>,
    sensitive: Vec<bool>,
    subgroups: SubgroupIndex,
}

impl EvaluationContext {
    /// Fits imputation and encoding on `train_rows` only and applies them to
    /// both row sets.
    pub fn new(ds: &TabularDataset, train_rows: &[usize], eval_rows: &[usize]) -> Result<Self> {
        if train_rows.is_empty() || eval_rows.is_empty() {
            return Err(Error::Contract("empty train or evaluation rows".into()));
        }
        let encoder = Encoder::fit(ds, train_rows)?;
        let train = encoder.transform(ds, train_rows)?;
        let eval = encoder.transform(ds, eval_rows)?;
        let subgroups = build_subgroups(ds, eval_rows, &encoder)?;
        let sensitive = ds.features().iter().map(|c| c.spec.is_sensitive).collect();
        Ok(Self {
            train_rows: train_rows.to_vec(),
            train_x: train.features,
            train_y: train.labels,
            eval_rows: eval_rows.to_vec(),
            eval_x: eval.features,
            eval_y: eval.labels,
            column_origin: train.column_origin,
            sensitive,
            subgroups,
        })
    }

    pub fn n_features(&self) -> usize {
        self.sensitive.len()
    }

    pub fn n_train(&self) -> usize {
        self.train_rows.len()
    }

    pub fn train_rows(&self) -> &[usize] {
        &self.train_rows
    }

    pub fn eval_rows(&self) -> &[usize] {
        &self.eval_rows
    }

    pub fn eval_labels(&self) -> &[u8] {
        &self.eval_y
    }

    pub fn subgroups(&self) -> &SubgroupIndex {
        &self.subgroups
    }

    /// Encoded column indices produced by the given original features.
    pub fn encoded_columns(&self, features: &[usize]) -> Vec<usize> {
        self.column_origin
            .iter()
            .enumerate()
            .filter(|(_, o)| features.contains(o))
            .map(|(j, _)| j)
            .collect()
    }
}

/// Rows and columns of the training data kept by a genome.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Positions within the context's training rows, ascending.
    pub rows: Vec<usize>,
    /// Original feature indices, ascending.
    pub features: Vec<usize>,
    /// Encoded column indices, ascending.
    pub columns: Vec<usize>,
}

impl Selection {
    /// Dataset row ids of the selected training rows.
    pub fn dataset_rows(&self, ctx: &EvaluationContext) -> Vec<usize> {
        self.rows.iter().map(|&i| ctx.train_rows[i]).collect()
    }

    pub fn usage(&self, ctx: &EvaluationContext) -> DataUsage {
        let positives = self.rows.iter().filter(|&&i| ctx.train_y[i] != 0).count();
        let sensitive = self.features.iter().filter(|&&f| ctx.sensitive[f]).count();
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        DataUsage {
            instances_frac: self.rows.len() as f64 / ctx.n_train() as f64,
            features_frac: self.features.len() as f64 / ctx.n_features() as f64,
            positive_pct: pct(positives, self.rows.len()),
            sensitives_pct: pct(sensitive, self.features.len()),
        }
    }
}

/// Row count kept by instance selection at `fraction`.
pub fn selected_row_count(fraction: f64, n: usize) -> usize {
    // tolerate representation error such as 0.3 * 10 = 3.0000000000000004
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Applies the genome's instance and feature selection to the training rows.
/// Errors when the reduced rows hold a single class.
pub fn apply_selection(g: &PipelineGenome, ctx: &EvaluationContext) -> Result<Selection> {
    g.validate(ctx.n_features())?;
    let all: Vec<usize> = (0..ctx.n_train()).collect();
    let rows = if g.dr_mode.uses_instances() {
        let size = selected_row_count(g.instance_fraction, all.len());
        stratified_subsample(&all, &ctx.train_y, size, g.instance_seed)
    } else {
        all
    };
    let features = g.selected_features();
    let columns = ctx.encoded_columns(&features);
    let selection = Selection {
        rows,
        features,
        columns,
    };
    let positives = selection.rows.iter().filter(|&&i| ctx.train_y[i] != 0).count();
    if positives == 0 || positives == selection.rows.len() {
        return Err(Error::Selection(format!(
            "{} selected rows hold a single class",
            selection.rows.len()
        )));
    }
    Ok(selection)
}

fn usage_from_genome(g: &PipelineGenome, ctx: &EvaluationContext) -> DataUsage {
    let features = g.selected_features();
    let sensitive = features.iter().filter(|&&f| ctx.sensitive.get(f) == Some(&true)).count();
    let n = ctx.n_train();
    DataUsage {
        instances_frac: selected_row_count(g.effective_fraction(), n) as f64 / n as f64,
        features_frac: features.len() as f64 / ctx.n_features().max(1) as f64,
        positive_pct: 0.0,
        sensitives_pct: if features.is_empty() {
            0.0
        } else {
            100.0 * sensitive as f64 / features.len() as f64
        },
    }
}

/// Trains the genome's model on its selection and scores the evaluation
/// rows. Failures map to a report with fitness 1.
pub fn evaluate(g: &PipelineGenome, ctx: &EvaluationContext, cfg: &FitnessConfig) -> FitnessReport {
    let start = Instant::now();
    let selection = match apply_selection(g, ctx) {
        Ok(s) => s,
        Err(e) => {
            return FitnessReport::failed(
                e.to_string(),
                usage_from_genome(g, ctx),
                start.elapsed().as_secs_f64(),
            )
        }
    };
    let usage = selection.usage(ctx);
    match score(g, ctx, &selection) {
        Ok((performance, fairness)) => FitnessReport {
            fitness: cfg.fitness(performance.performance_component, fairness.fairness_component),
            fairness,
            performance,
            instances_frac: usage.instances_frac,
            features_frac: usage.features_frac,
            positive_pct: usage.positive_pct,
            sensitives_pct: usage.sensitives_pct,
            eval_seconds: start.elapsed().as_secs_f64(),
            error: None,
        },
        Err(e) => FitnessReport::failed(e.to_string(), usage, start.elapsed().as_secs_f64()),
    }
}

/// Evaluation scores of the model trained on `selection`.
pub fn predict_eval_scores(
    g: &PipelineGenome,
    ctx: &EvaluationContext,
    selection: &Selection,
) -> Result<Vec<f64>> {
    let x = ctx.train_x.select(&selection.rows, &selection.columns);
    let y: Vec<u8> = selection.rows.iter().map(|&i| ctx.train_y[i]).collect();
    let model = models::train(&g.model_spec, &x, &y, g.instance_seed)?;
    let eval_all: Vec<usize> = (0..ctx.eval_x.rows()).collect();
    model.predict_scores(&ctx.eval_x.select(&eval_all, &selection.columns))
}

fn score(
    g: &PipelineGenome,
    ctx: &EvaluationContext,
    selection: &Selection,
) -> Result<(PerformanceBundle, FairnessBundle)> {
    let scores = predict_eval_scores(g, ctx, selection)?;
    let performance = performance_bundle(&scores, &ctx.eval_y)?;
    let fairness = fairness_bundle(&scores, &ctx.eval_y, &ctx.subgroups)?;
    Ok((performance, fairness))
}
