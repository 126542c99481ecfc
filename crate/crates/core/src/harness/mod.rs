//! Experiment protocol: seeds x folds x setups, held-out scoring, persisted
//! run artifacts, statistics and aggregate reports.

mod report;
pub mod stats;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_kfold, train_validation_split, TabularDataset};
use crate::error::{Error, Result};
use crate::models::ModelId;
use crate::pipeline::{
    apply_selection, evaluate, DrMode, EvaluationContext, FitnessConfig, FitnessReport,
    PipelineGenome,
};
use crate::rng::derive_seed;
use crate::search::{evolve, GenerationTrace, SearchConfig};

pub use report::{
    emit_reports, format_number, metric_rows, pct_change, pearson, Aggregate, MetricRow, METRICS,
    NA,
};

pub const PLAN_FILE: &str = "plan.json";
pub const EXPERIMENT_FILE: &str = "experiment.json";
pub const RUNS_DIR: &str = "runs";
pub const GENOME_FILE: &str = "genome.json";
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    Baseline,
    FairnessAware,
}

impl Setup {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setup::Baseline => "baseline",
            Setup::FairnessAware => "fairness_aware",
        }
    }

    pub fn fitness(&self, alpha: f64) -> FitnessConfig {
        match self {
            Setup::Baseline => FitnessConfig {
                alpha,
                mode: crate::pipeline::FitnessMode::Baseline,
            },
            Setup::FairnessAware => FitnessConfig::fairness_aware(alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub dataset_id: String,
    pub k_folds: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub setups: Vec<Setup>,
    pub alpha: f64,
    pub validation_fraction: f64,
    /// Template; the seed and fitness are set per run.
    pub search: SearchConfig,
}

impl ExperimentPlan {
    pub fn new(dataset_id: impl Into<String>) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            k_folds: 5,
            n_seeds: 30,
            base_seed: 0,
            setups: vec![Setup::Baseline, Setup::FairnessAware],
            alpha: FitnessConfig::DEFAULT_ALPHA,
            validation_fraction: 0.25,
            search: SearchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds {} must be at least 2", self.k_folds)));
        }
        if self.n_seeds == 0 {
            return Err(Error::Config("n_seeds must be positive".into()));
        }
        if self.setups.is_empty() {
            return Err(Error::Config("no setups selected".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        self.setups[0].fitness(self.alpha).validate()?;
        self.search.validate()
    }

    pub fn run_seed(&self, seed_index: usize) -> u64 {
        derive_seed(self.base_seed, &[seed_index as u64])
    }
}

/// Dataset facts needed to rebuild reports from persisted records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub dataset_id: String,
    pub n_rows: usize,
    pub feature_names: Vec<String>,
    pub sensitive: Vec<bool>,
    /// Category proportions of each sensitive attribute over all rows.
    pub original_sensitive_props: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ExperimentMeta {
    pub fn from_dataset(dataset_id: &str, ds: &TabularDataset) -> Self {
        let all: Vec<usize> = (0..ds.n_rows()).collect();
        Self {
            dataset_id: dataset_id.to_string(),
            n_rows: ds.n_rows(),
            feature_names: ds.feature_names(),
            sensitive: ds.features().iter().map(|c| c.spec.is_sensitive).collect(),
            original_sensitive_props: ds
                .sensitive_indices()
                .into_iter()
                .map(|c| (ds.feature(c).spec.name.clone(), ds.category_proportions(c, &all)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeSummary {
    pub dr_mode: DrMode,
    pub model_id: ModelId,
    pub features: Vec<String>,
}

/// Row ids used by one (seed, fold); shared by every setup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed_index: usize,
    pub run_seed: u64,
    pub fold: usize,
    pub k_folds: usize,
    pub outer_train: Vec<usize>,
    pub test: Vec<usize>,
    pub inner_train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Outcome of one (seed, fold, setup) search and its held-out scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed_index: usize,
    pub run_seed: u64,
    pub fold: usize,
    pub setup: Setup,
    pub error: Option<String>,
    pub genome: Option<PipelineGenome>,
    pub summary: Option<GenomeSummary>,
    /// Best report on the validation rows during search.
    pub validation: Option<FitnessReport>,
    /// Report of the refitted best genome on the test fold.
    pub test: Option<FitnessReport>,
    /// Category proportions in the selected training rows, for sensitive
    /// attributes kept by the genome.
    pub sensitive_props: BTreeMap<String, BTreeMap<String, f64>>,
    pub generations: usize,
    pub truncated: bool,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub trace: Vec<GenerationTrace>,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.error.is_none() && self.test.is_some()
    }

    pub fn dir_name(&self) -> String {
        run_dir_name(self.seed_index, self.fold, self.setup)
    }

    fn failed(split: &SplitRecord, setup: Setup, message: String) -> Self {
        Self {
            seed_index: split.seed_index,
            run_seed: split.run_seed,
            fold: split.fold,
            setup,
            error: Some(message),
            genome: None,
            summary: None,
            validation: None,
            test: None,
            sensitive_props: BTreeMap::new(),
            generations: 0,
            truncated: false,
            wall_seconds: 0.0,
            trace: Vec::new(),
        }
    }
}

pub fn run_dir_name(seed_index: usize, fold: usize, setup: Setup) -> String {
    format!("seed{seed_index:03}_fold{fold}_{}", setup.as_str())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub meta: ExperimentMeta,
    pub records: Vec<RunRecord>,
}

impl ExperimentResult {
    pub fn records_for(&self, setup: Setup) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.setup == setup)
    }

    pub fn expected_runs(&self) -> usize {
        self.plan.n_seeds * self.plan.k_folds
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::CorruptRecord {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptRecord {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn sensitive_props(
    ds: &TabularDataset,
    genome: &PipelineGenome,
    rows: &[usize],
) -> BTreeMap<String, BTreeMap<String, f64>> {
    genome
        .selected_features()
        .into_iter()
        .filter(|&c| ds.feature(c).spec.is_sensitive)
        .map(|c| (ds.feature(c).spec.name.clone(), ds.category_proportions(c, rows)))
        .collect()
}

fn run_one(
    ds: &TabularDataset,
    plan: &ExperimentPlan,
    split: &SplitRecord,
    search_ctx: &EvaluationContext,
    test_ctx: &EvaluationContext,
    setup: Setup,
    dir: Option<&Path>,
) -> Result<RunRecord> {
    let start = Instant::now();
    let fitness = setup.fitness(plan.alpha);
    let cfg = SearchConfig {
        seed: derive_seed(split.run_seed, &[split.fold as u64, 2]),
        fitness,
        ..plan.search.clone()
    };
    let mut trace_out = match dir {
        Some(d) => Some(BufWriter::new(File::create(d.join(TRACE_FILE))?)),
        None => None,
    };
    let mut write_err = None;
    let outcome = evolve(&cfg, search_ctx, |t| {
        if let Some(w) = trace_out.as_mut() {
            let line = serde_json::to_string(t).expect("trace serialises");
            if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let genome = outcome.best_genome;
    let test = evaluate(&genome, test_ctx, &fitness);
    let props = match apply_selection(&genome, test_ctx) {
        Ok(sel) => sensitive_props(ds, &genome, &sel.dataset_rows(test_ctx)),
        Err(_) => BTreeMap::new(),
    };
    let names = ds.feature_names();
    Ok(RunRecord {
        seed_index: split.seed_index,
        run_seed: split.run_seed,
        fold: split.fold,
        setup,
        error: test.error.clone(),
        summary: Some(GenomeSummary {
            dr_mode: genome.dr_mode,
            model_id: genome.model_spec.model_id(),
            features: genome.selected_features().into_iter().map(|c| names[c].clone()).collect(),
        }),
        genome: Some(genome),
        validation: Some(outcome.best_report),
        test: Some(test),
        sensitive_props: props,
        generations: outcome.trace.len(),
        truncated: outcome.truncated,
        wall_seconds: start.elapsed().as_secs_f64(),
        trace: outcome.trace,
    })
}

/// Runs every (seed, fold, setup) of `plan` on `ds`. With `out`, artifacts
/// are written as they complete. A failing run is recorded and the
/// experiment continues. `progress` sees each finished record.
pub fn run_experiment(
    plan: &ExperimentPlan,
    ds: &TabularDataset,
    out: Option<&Path>,
    mut progress: impl FnMut(&RunRecord),
) -> Result<ExperimentResult> {
    plan.validate()?;
    let meta = ExperimentMeta::from_dataset(&plan.dataset_id, ds);
    if let Some(dir) = out {
        fs::create_dir_all(dir.join(RUNS_DIR))?;
        write_json(&dir.join(PLAN_FILE), plan)?;
        write_json(&dir.join(EXPERIMENT_FILE), &meta)?;
    }
    let mut records = Vec::new();
    for seed_index in 0..plan.n_seeds {
        let run_seed = plan.run_seed(seed_index);
        let folds = stratified_kfold(ds.labels(), plan.k_folds, run_seed)?;
        for fold in 0..plan.k_folds {
            let outer_train = folds.train_rows(fold);
            let test = folds.test_rows(fold);
            let split_seed = derive_seed(run_seed, &[fold as u64, 1]);
            let prepared = train_validation_split(
                &outer_train,
                ds.labels(),
                plan.validation_fraction,
                split_seed,
            )
            .and_then(|(inner_train, validation)| {
                let split = SplitRecord {
                    seed_index,
                    run_seed,
                    fold,
                    k_folds: plan.k_folds,
                    outer_train: outer_train.clone(),
                    test: test.clone(),
                    inner_train,
                    validation,
                };
                let search_ctx = EvaluationContext::new(ds, &split.inner_train, &split.validation)?;
                let test_ctx = EvaluationContext::new(ds, &split.outer_train, &split.test)?;
                Ok((split, search_ctx, test_ctx))
            });
            for &setup in &plan.setups {
                let fallback = SplitRecord {
                    seed_index,
                    run_seed,
                    fold,
                    k_folds: plan.k_folds,
                    outer_train: outer_train.clone(),
                    test: test.clone(),
                    inner_train: Vec::new(),
                    validation: Vec::new(),
                };
                let dir = match out {
                    Some(o) => {
                        let d = o.join(RUNS_DIR).join(run_dir_name(seed_index, fold, setup));
                        fs::create_dir_all(&d)?;
                        Some(d)
                    }
                    None => None,
                };
                let record = match &prepared {
                    Ok((split, search_ctx, test_ctx)) => {
                        if let Some(d) = &dir {
                            write_json(&d.join(SPLIT_FILE), split)?;
                        }
                        run_one(ds, plan, split, search_ctx, test_ctx, setup, dir.as_deref())
                            .unwrap_or_else(|e| RunRecord::failed(split, setup, e.to_string()))
                    }
                    Err(e) => {
                        if let Some(d) = &dir {
                            write_json(&d.join(SPLIT_FILE), &fallback)?;
                        }
                        RunRecord::failed(&fallback, setup, e.to_string())
                    }
                };
                if let Some(d) = &dir {
                    write_json(&d.join(REPORT_FILE), &record)?;
                    if let Some(g) = &record.genome {
                        write_json(&d.join(GENOME_FILE), g)?;
                    }
                }
                progress(&record);
                records.push(record);
            }
        }
    }
    records.sort_by_key(|r| (r.seed_index, r.fold, r.setup));
    Ok(ExperimentResult {
        plan: plan.clone(),
        meta,
        records,
    })
}

/// Run directories under `dir`, sorted by name.
pub fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let runs = dir.join(RUNS_DIR);
    let mut out: Vec<PathBuf> = fs::read_dir(&runs)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_split(run_dir: &Path) -> Result<SplitRecord> {
    read_json(&run_dir.join(SPLIT_FILE))
}

fn load_trace(path: &Path) -> Result<Vec<GenerationTrace>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let corrupt = |message: String| Error::CorruptRecord {
        path: path.to_path_buf(),
        message,
    };
    let reader = BufReader::new(File::open(path).map_err(|e| corrupt(e.to_string()))?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| corrupt(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?);
    }
    Ok(out)
}

/// Rebuilds an [`ExperimentResult`] from an artifact directory. Runs without
/// a report file (interrupted) are skipped.
pub fn load_experiment(dir: &Path) -> Result<ExperimentResult> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("artifact directory {} not found", dir.display()),
        )));
    }
    let plan: ExperimentPlan = read_json(&dir.join(PLAN_FILE))?;
    let meta: ExperimentMeta = read_json(&dir.join(EXPERIMENT_FILE))?;
    let mut records = Vec::new();
    for run in run_dirs(dir)? {
        let report = run.join(REPORT_FILE);
        if !report.exists() {
            continue;
        }
        let mut record: RunRecord = read_json(&report)?;
        record.trace = load_trace(&run.join(TRACE_FILE))?;
        records.push(record);
    }
    records.sort_by_key(|r| (r.seed_index, r.fold, r.setup));
    Ok(ExperimentResult {
        plan,
        meta,
        records,
    })
}
