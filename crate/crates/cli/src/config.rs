use std::fs;
use std::path::{Path, PathBuf};

use fairevo::harness::{ExperimentPlan, Setup};
use fairevo::pipeline::FitnessConfig;
use fairevo::search::SearchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SetupChoice {
    Baseline,
    Fair,
    Both,
}

impl SetupChoice {
    pub fn setups(self) -> Vec<Setup> {
        match self {
            SetupChoice::Baseline => vec![Setup::Baseline],
            SetupChoice::Fair => vec![Setup::FairnessAware],
            SetupChoice::Both => vec![Setup::Baseline, Setup::FairnessAware],
        }
    }
}

fn default_setup() -> SetupChoice {
    SetupChoice::Both
}
fn default_seeds() -> usize {
    5
}
fn default_folds() -> usize {
    5
}
fn default_alpha() -> f64 {
    FitnessConfig::DEFAULT_ALPHA
}
fn default_validation() -> f64 {
    0.25
}
fn default_budget() -> f64 {
    120.0
}
fn default_out() -> PathBuf {
    PathBuf::from("fairevo-out")
}

/// Experiment configuration file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    #[serde(default)]
    pub dataset_id: Option<String>,
    /// Overrides the schema's sensitive flags when present.
    #[serde(default)]
    pub sensitive: Option<Vec<String>>,
    /// Stratified row cap applied before the experiment.
    #[serde(default)]
    pub max_rows: Option<usize>,
    #[serde(default = "default_setup")]
    pub setup: SetupChoice,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_validation")]
    pub validation_fraction: f64,
    #[serde(default = "default_budget")]
    pub time_budget_s: f64,
    #[serde(default)]
    pub population_size: Option<usize>,
    #[serde(default)]
    pub tournament_size: Option<usize>,
    #[serde(default)]
    pub elitism: Option<usize>,
    #[serde(default)]
    pub p_crossover: Option<f64>,
    #[serde(default)]
    pub p_mutation: Option<f64>,
    #[serde(default)]
    pub patience: Option<usize>,
    #[serde(default)]
    pub change_pct: Option<f64>,
    #[serde(default)]
    pub parallel_jobs: Option<usize>,
    #[serde(default)]
    pub max_generations: Option<usize>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.schema, &mut cfg.out] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn plan(&self) -> Result<ExperimentPlan, String> {
        let d = SearchConfig::default();
        let search = SearchConfig {
            population_size: self.population_size.unwrap_or(d.population_size),
            tournament_size: self.tournament_size.unwrap_or(d.tournament_size),
            elitism: self.elitism.unwrap_or(d.elitism),
            p_crossover: self.p_crossover.unwrap_or(d.p_crossover),
            p_mutation: self.p_mutation.unwrap_or(d.p_mutation),
            patience: self.patience.unwrap_or(d.patience),
            change_pct: self.change_pct.unwrap_or(d.change_pct),
            time_budget_s: self.time_budget_s,
            parallel_jobs: self.parallel_jobs.unwrap_or(d.parallel_jobs),
            seed: 0,
            fitness: FitnessConfig::fairness_aware(self.alpha),
            max_generations: self.max_generations,
        };
        let dataset_id = self.dataset_id.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map_or("dataset".into(), |s| s.to_string_lossy().into_owned())
        });
        let plan = ExperimentPlan {
            dataset_id,
            k_folds: self.folds,
            n_seeds: self.seeds,
            base_seed: self.base_seed,
            setups: self.setup.setups(),
            alpha: self.alpha,
            validation_fraction: self.validation_fraction,
            search,
        };
        plan.validate().map_err(|e| e.to_string())?;
        Ok(plan)
    }
}
