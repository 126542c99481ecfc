mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairevo::data::{load_csv, stratified_subsample, Schema};
use fairevo::fairness::{fairness_bundle, SubgroupIndex};
use fairevo::harness::{self, emit_reports, load_experiment};
use fairevo::metrics::performance_bundle;
use fairevo::Error;

use config::{RunConfigFile, SetupChoice};

const CONFIG_FILE: &str = "config.json";

#[derive(Parser)]
#[command(name = "fairevo", version, about = "Fairness-aware evolutionary pipeline search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-validated experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        /// Seconds per search.
        #[arg(long)]
        time_budget: Option<f64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Parallel evaluations per search.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        setup: Option<SetupChoice>,
    },
    /// Score predictions against labels and sensitive groups.
    Score {
        /// One score in [0, 1] per line.
        #[arg(long)]
        predictions: PathBuf,
        /// One 0/1 label per line.
        #[arg(long)]
        labels: PathBuf,
        /// CSV with a header of attribute names and one row per instance.
        #[arg(long)]
        groups: PathBuf,
    },
    /// Regenerate aggregate CSVs from a run directory.
    Report { dir: PathBuf },
}

enum Failure {
    /// Bad configuration or input; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    alpha: Option<f64>,
    time_budget: Option<f64>,
    seeds: Option<usize>,
    folds: Option<usize>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    setup: Option<SetupChoice>,
) -> Result<(), Failure> {
    let mut cfg = RunConfigFile::load(config).map_err(Failure::Usage)?;
    if let Some(v) = alpha {
        cfg.alpha = v;
    }
    if let Some(v) = time_budget {
        cfg.time_budget_s = v;
    }
    if let Some(v) = seeds {
        cfg.seeds = v;
    }
    if let Some(v) = folds {
        cfg.folds = v;
    }
    if let Some(v) = jobs {
        cfg.parallel_jobs = Some(v);
    }
    if let Some(v) = out {
        cfg.out = v;
    }
    if let Some(v) = setup {
        cfg.setup = v;
    }
    let plan = cfg.plan().map_err(Failure::Usage)?;

    let mut schema = Schema::from_json_file(&cfg.schema).map_err(usage)?;
    if let Some(names) = &cfg.sensitive {
        schema = schema.with_sensitive(names).map_err(usage)?;
    }
    let mut ds = load_csv(&cfg.dataset, &schema)
        .map_err(|e| usage(format!("{}: {e}", cfg.dataset.display())))?;
    if let Some(cap) = cfg.max_rows {
        if cap < ds.n_rows() {
            let all: Vec<usize> = (0..ds.n_rows()).collect();
            let rows = stratified_subsample(&all, ds.labels(), cap, cfg.base_seed);
            ds = ds.select_rows(&rows).map_err(usage)?;
        }
    }
    if ds.sensitive_indices().is_empty() {
        return Err(Failure::Usage("no sensitive attributes declared".into()));
    }

    fs::create_dir_all(&cfg.out).map_err(runtime)?;
    let text = serde_json::to_string_pretty(&cfg).map_err(runtime)? + "\n";
    fs::write(cfg.out.join(CONFIG_FILE), text).map_err(runtime)?;

    let total = plan.n_seeds * plan.k_folds * plan.setups.len();
    let mut done = 0;
    let result = harness::run_experiment(&plan, &ds, Some(&cfg.out), |r| {
        done += 1;
        match (&r.error, &r.test) {
            (None, Some(t)) => eprintln!(
                "[{done}/{total}] seed {} fold {} {}: test fitness {:.4}",
                r.seed_index,
                r.fold,
                r.setup.as_str(),
                t.fitness
            ),
            (err, _) => eprintln!(
                "[{done}/{total}] seed {} fold {} {}: failed: {}",
                r.seed_index,
                r.fold,
                r.setup.as_str(),
                err.as_deref().unwrap_or("no test report")
            ),
        }
    })
    .map_err(|e| match e {
        Error::Config(_) | Error::Split(_) | Error::Schema(_) => usage(e),
        _ => runtime(e),
    })?;
    emit_reports(&result, &cfg.out).map_err(runtime)?;
    let completed = result.records.iter().filter(|r| r.completed()).count();
    println!(
        "{completed}/{} runs completed; artifacts in {}",
        result.records.len(),
        cfg.out.display()
    );
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn cmd_score(predictions: &Path, labels: &Path, groups: &Path) -> Result<(), Failure> {
    let scores: Vec<f64> = read_lines(predictions)?
        .iter()
        .enumerate()
        .map(|(i, l)| match l.parse::<f64>() {
            Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
            _ => Err(usage(format!("predictions line {}: `{l}` is not a score in [0, 1]", i + 1))),
        })
        .collect::<Result<_, _>>()?;
    let labels: Vec<u8> = read_lines(labels)?
        .iter()
        .enumerate()
        .map(|(i, l)| match l.as_str() {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(usage(format!("labels line {}: `{l}` is not 0 or 1", i + 1))),
        })
        .collect::<Result<_, _>>()?;

    let mut reader = csv::Reader::from_path(groups).map_err(|e| usage(format!("{}: {e}", groups.display())))?;
    let attributes: Vec<String> = reader.headers().map_err(usage)?.iter().map(String::from).collect();
    let keys: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(usage)?;

    if scores.is_empty() {
        return Err(usage("no predictions"));
    }
    if scores.len() != labels.len() || scores.len() != keys.len() {
        return Err(usage(format!(
            "misaligned inputs: {} predictions, {} labels, {} group rows",
            scores.len(),
            labels.len(),
            keys.len()
        )));
    }
    let sg = SubgroupIndex::from_keys(&attributes, &keys, &labels).map_err(usage)?;
    let perf = performance_bundle(&scores, &labels).map_err(runtime)?;
    let fair = fairness_bundle(&scores, &labels, &sg).map_err(runtime)?;
    println!("rows: {}", scores.len());
    println!("groups: {}", sg.n_groups());
    println!("dp: {}", harness::format_number(fair.dp));
    println!("eo: {}", harness::format_number(fair.eo));
    println!("abroca: {}", harness::format_number(fair.abroca));
    println!("fairness_component: {}", harness::format_number(fair.fairness_component));
    println!("mcc: {}", harness::format_number(perf.mcc));
    println!("tpr: {}", harness::format_number(perf.tpr));
    println!("f1: {}", harness::format_number(perf.f1));
    println!("aucroc: {}", harness::format_number(perf.aucroc));
    println!("performance_component: {}", harness::format_number(perf.performance_component));
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<(), Failure> {
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a directory", dir.display())));
    }
    let result = load_experiment(dir).map_err(runtime)?;
    emit_reports(&result, dir).map_err(runtime)?;
    let completed = result.records.iter().filter(|r| r.completed()).count();
    let expected = result.expected_runs() * result.plan.setups.len();
    if completed < expected {
        eprintln!("incomplete: {completed} of {expected} runs completed");
    }
    println!("reports written to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            alpha,
            time_budget,
            seeds,
            folds,
            jobs,
            out,
            setup,
        } => cmd_run(&config, alpha, time_budget, seeds, folds, jobs, out, setup),
        Command::Score {
            predictions,
            labels,
            groups,
        } => cmd_score(&predictions, &labels, &groups),
        Command::Report { dir } => cmd_report(&dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
