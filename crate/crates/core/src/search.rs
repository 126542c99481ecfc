//! Generational genetic algorithm over pipeline genomes.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::HyperparamSpace;
use crate::pipeline::{
    crossover, evaluate, mutate, random_genome, EvaluationContext, FitnessConfig, FitnessReport,
    PipelineGenome, N_GENES,
};
use crate::rng::{self, Rng};

/// Improvement below this counts as stagnation.
pub const STAGNATION_EPS: f64 = 1e-6;

const INJECTION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub elitism: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub patience: usize,
    pub change_pct: f64,
    pub time_budget_s: f64,
    pub parallel_jobs: usize,
    pub seed: u64,
    pub fitness: FitnessConfig,
    /// Optional cap on generations, including the initial one.
    #[serde(default)]
    pub max_generations: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 25,
            tournament_size: 3,
            elitism: 1,
            p_crossover: 0.7,
            p_mutation: 0.3,
            patience: 5,
            change_pct: 0.10,
            time_budget_s: 1800.0,
            parallel_jobs: 5,
            seed: 0,
            fitness: FitnessConfig::fairness_aware(FitnessConfig::DEFAULT_ALPHA),
            max_generations: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.population_size == 0 {
            return fail("population_size must be positive".into());
        }
        if self.elitism >= self.population_size {
            return fail(format!(
                "elitism {} must be below population_size {}",
                self.elitism, self.population_size
            ));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return fail(format!(
                "tournament_size {} must be in [1, {}]",
                self.tournament_size, self.population_size
            ));
        }
        for (name, p) in [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
            ("change_pct", self.change_pct),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} {p} outside [0, 1]"));
            }
        }
        if self.time_budget_s.is_nan() || self.time_budget_s < 0.0 {
            return fail(format!("time_budget_s {} must be non-negative", self.time_budget_s));
        }
        if self.parallel_jobs == 0 {
            return fail("parallel_jobs must be positive".into());
        }
        if self.max_generations == Some(0) {
            return fail("max_generations must be positive".into());
        }
        self.fitness.validate()
    }
}

/// Per-generation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub generation: usize,
    /// Best-ever report so far, without timing.
    pub best: FitnessReport,
    pub mean_fitness: f64,
    pub mcc: f64,
    pub tpr: f64,
    pub dp: f64,
    pub eo: f64,
    pub abroca: f64,
    /// Individuals replaced by fresh random genomes after this generation.
    pub injected: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_genome: PipelineGenome,
    pub best_report: FitnessReport,
    pub trace: Vec<GenerationTrace>,
    /// True when the budget ran out before any generation after the first.
    pub truncated: bool,
}

/// A genome with its evaluation.
#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: PipelineGenome,
    pub key: String,
    pub report: FitnessReport,
}

impl Individual {
    pub fn new(genome: PipelineGenome, report: FitnessReport) -> Self {
        Self {
            key: genome.to_key(),
            genome,
            report,
        }
    }
}

/// Lower fitness first, then lower data usage, then genome text.
pub fn compare(a: &Individual, b: &Individual) -> Ordering {
    a.report
        .fitness
        .total_cmp(&b.report.fitness)
        .then(a.report.data_usage().total_cmp(&b.report.data_usage()))
        .then_with(|| a.key.cmp(&b.key))
}

/// Index of the best of `k` individuals drawn with replacement.
pub fn tournament_select(population: &[Individual], k: usize, rng: &mut Rng) -> usize {
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..k.max(1) {
        let c = rng.gen_range(0..population.len());
        if compare(&population[c], &population[best]) == Ordering::Less {
            best = c;
        }
    }
    best
}

fn ranked(population: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.sort_by(|&a, &b| compare(&population[a], &population[b]));
    idx
}

/// True when the last `patience` generations of `best_history` improved by
/// less than [`STAGNATION_EPS`].
pub fn stagnated(best_history: &[f64], patience: usize) -> bool {
    if patience == 0 || best_history.len() <= patience {
        return false;
    }
    let now = best_history[best_history.len() - 1];
    let then = best_history[best_history.len() - 1 - patience];
    then - now < STAGNATION_EPS
}

/// On stagnation, replaces the worst `ceil(change_pct * n)` non-elite
/// individuals with genomes from `fresh`. Returns the replaced slots, which
/// hold placeholder reports until evaluated.
pub fn diversity_injection(
    population: &mut [Individual],
    best_history: &[f64],
    patience: usize,
    change_pct: f64,
    elitism: usize,
    rng: &mut Rng,
    mut fresh: impl FnMut(&mut Rng) -> PipelineGenome,
) -> Vec<usize> {
    if !stagnated(best_history, patience) {
        return Vec::new();
    }
    let n = population.len();
    let count = ((change_pct * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let order = ranked(population);
    let mut slots: Vec<usize> = order
        .into_iter()
        .skip(elitism)
        .rev()
        .take(count)
        .collect();
    slots.sort_unstable();
    for &s in &slots {
        let g = fresh(rng);
        population[s] = Individual::new(g, FitnessReport::failed(
            "not evaluated".into(),
            crate::pipeline::DataUsage {
                instances_frac: 1.0,
                features_frac: 1.0,
                positive_pct: 0.0,
                sensitives_pct: 0.0,
            },
            0.0,
        ));
    }
    slots
}

struct Evaluator<'a> {
    ctx: &'a EvaluationContext,
    cfg: &'a SearchConfig,
    pool: rayon::ThreadPool,
    cache: HashMap<String, FitnessReport>,
    start: Instant,
    budget: Duration,
}

impl Evaluator<'_> {
    fn expired(&self) -> bool {
        self.start.elapsed() >= self.budget
    }

    /// Evaluates `genomes` in batches of `parallel_jobs`. With `respect_budget`
    /// it stops before a batch once the budget is spent and returns `None`.
    fn run(&mut self, genomes: &[PipelineGenome], respect_budget: bool) -> Option<Vec<FitnessReport>> {
        let keys: Vec<String> = genomes.iter().map(PipelineGenome::to_key).collect();
        let mut pending: Vec<usize> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.cache.contains_key(k) && !pending.iter().any(|&j| keys[j] == *k) {
                pending.push(i);
            }
        }
        for batch in pending.chunks(self.cfg.parallel_jobs) {
            if respect_budget && self.expired() {
                return None;
            }
            let (ctx, fitness) = (self.ctx, &self.cfg.fitness);
            let reports: Vec<FitnessReport> = self.pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| evaluate(&genomes[i], ctx, fitness))
                    .collect()
            });
            for (&i, r) in batch.iter().zip(reports) {
                self.cache.insert(keys[i].clone(), r);
            }
        }
        Some(keys.iter().map(|k| self.cache[k].clone()).collect())
    }
}

fn summarise(generation: usize, population: &[Individual], best: &Individual, injected: usize) -> GenerationTrace {
    let mean = population.iter().map(|i| i.report.fitness).sum::<f64>() / population.len() as f64;
    let r = best.report.without_timing();
    GenerationTrace {
        generation,
        mean_fitness: mean,
        mcc: r.performance.mcc,
        tpr: r.performance.tpr,
        dp: r.fairness.dp,
        eo: r.fairness.eo,
        abroca: r.fairness.abroca,
        best: r,
        injected,
    }
}

/// Minimises fitness over pipeline genomes evaluated on `ctx`. The initial
/// population is always fully evaluated; later generations stop at the time
/// budget or `max_generations`. `observer` sees each trace record as it is
/// produced.
pub fn evolve(
    cfg: &SearchConfig,
    ctx: &EvaluationContext,
    mut observer: impl FnMut(&GenerationTrace),
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let space = HyperparamSpace::default();
    let n_features = ctx.n_features();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel_jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut ev = Evaluator {
        ctx,
        cfg,
        pool,
        cache: HashMap::new(),
        start: Instant::now(),
        budget: Duration::from_secs_f64(cfg.time_budget_s),
    };
    let p_gene = 1.0 / N_GENES as f64;
    let pop_n = cfg.population_size;

    let genomes: Vec<PipelineGenome> = (0..pop_n)
        .map(|slot| random_genome(&mut rng::derived_rng(cfg.seed, &[0, slot as u64]), n_features, &space))
        .collect();
    let reports = ev.run(&genomes, false).expect("unbudgeted run completes");
    let mut population: Vec<Individual> =
        genomes.into_iter().zip(reports).map(|(g, r)| Individual::new(g, r)).collect();

    let mut best = population[ranked(&population)[0]].clone();
    let mut history = vec![best.report.fitness];
    let mut since_reset = 0;
    let mut trace = Vec::new();
    let mut generation = 0usize;
    let mut truncated = false;

    loop {
        // stagnation response before recording, so the trace shows it
        let mut injected = 0;
        let mut inj_rng = rng::derived_rng(cfg.seed, &[generation as u64, INJECTION_STREAM]);
        let slots = diversity_injection(
            &mut population,
            &history[since_reset..],
            cfg.patience,
            cfg.change_pct,
            cfg.elitism,
            &mut inj_rng,
            |r| random_genome(r, n_features, &space),
        );
        if !slots.is_empty() {
            let fresh: Vec<PipelineGenome> = slots.iter().map(|&s| population[s].genome.clone()).collect();
            let reports = ev.run(&fresh, false).expect("unbudgeted run completes");
            for (&s, r) in slots.iter().zip(reports) {
                population[s].report = r;
            }
            injected = slots.len();
            since_reset = history.len() - 1;
            let top = &population[ranked(&population)[0]];
            if compare(top, &best) == Ordering::Less {
                best = top.clone();
                *history.last_mut().unwrap() = best.report.fitness;
            }
        }
        let record = summarise(generation, &population, &best, injected);
        observer(&record);
        trace.push(record);

        if cfg.max_generations.is_some_and(|m| trace.len() >= m) {
            break;
        }
        if ev.expired() {
            truncated = generation == 0;
            break;
        }

        generation += 1;
        let order = ranked(&population);
        let mut children: Vec<PipelineGenome> =
            order.iter().take(cfg.elitism).map(|&i| population[i].genome.clone()).collect();
        for slot in cfg.elitism..pop_n {
            let mut r = rng::derived_rng(cfg.seed, &[generation as u64, slot as u64]);
            let a = tournament_select(&population, cfg.tournament_size, &mut r);
            let b = tournament_select(&population, cfg.tournament_size, &mut r);
            let mut child = if r.gen_bool(cfg.p_crossover) {
                crossover(&population[a].genome, &population[b].genome, &mut r).0
            } else {
                population[a].genome.clone()
            };
            if r.gen_bool(cfg.p_mutation) {
                child = mutate(&child, &mut r, p_gene, &space);
            }
            children.push(child);
        }
        let Some(reports) = ev.run(&children, true) else {
            truncated = generation == 1;
            break;
        };
        population = children.into_iter().zip(reports).map(|(g, r)| Individual::new(g, r)).collect();
        let top = &population[ranked(&population)[0]];
        if compare(top, &best) == Ordering::Less {
            best = top.clone();
        }
        history.push(best.report.fitness);
    }

    Ok(SearchOutcome {
        best_genome: best.genome,
        best_report: best.report,
        trace,
        truncated,
    })
}
