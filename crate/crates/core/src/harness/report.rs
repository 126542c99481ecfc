use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::stats::{significance, Verdict};
use super::{ExperimentResult, RunRecord, Setup};
use crate::error::Result;
use crate::models::ModelId;
use crate::pipeline::{DrMode, FitnessReport};

/// Null marker in emitted tables.
pub const NA: &str = "NA";

type Getter = fn(&FitnessReport) -> f64;

/// Reported metrics and how each is read from a test report.
pub const METRICS: [(&str, Getter); 11] = [
    ("dp", |r| r.fairness.dp),
    ("eo", |r| r.fairness.eo),
    ("abroca", |r| r.fairness.abroca),
    ("mcc", |r| r.performance.mcc),
    ("tpr", |r| r.performance.tpr),
    ("aucroc", |r| r.performance.aucroc),
    ("f1", |r| r.performance.f1),
    ("instances_frac", |r| r.instances_frac),
    ("features_frac", |r| r.features_frac),
    ("positive_pct", |r| r.positive_pct),
    ("sensitives_pct", |r| r.sensitives_pct),
];

/// `%g`-style rendering with 6 significant digits; non-finite values become
/// [`NA`].
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return NA.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{x:.*}", (5 - exp) as usize))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), format_number)
}

/// Relative change from `baseline` to `fair` in percent; `None` for a zero
/// baseline.
pub fn pct_change(baseline: f64, fair: f64) -> Option<f64> {
    if baseline == 0.0 {
        None
    } else {
        Some((fair - baseline) / baseline * 100.0)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sample_std(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    (v.len() >= 2).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Mean and spread of one metric for one setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub variant: &'static str,
    pub metric: &'static str,
    pub baseline: Aggregate,
    pub fair: Aggregate,
    pub pct_change: Option<f64>,
    pub verdict: Option<Verdict>,
    pub complete: bool,
}

fn completed(result: &ExperimentResult, setup: Setup) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = result.records_for(setup).filter(|r| r.completed()).collect();
    v.sort_by_key(|r| (r.seed_index, r.fold));
    v
}

/// Per-seed samples of every metric: fold means, or the fold with the lowest
/// test fitness.
fn per_seed(records: &[&RunRecord], best_only: bool) -> BTreeMap<usize, Vec<f64>> {
    let mut by_seed: BTreeMap<usize, Vec<&FitnessReport>> = BTreeMap::new();
    for r in records {
        by_seed.entry(r.seed_index).or_default().push(r.test.as_ref().expect("completed"));
    }
    by_seed
        .into_iter()
        .map(|(seed, reports)| {
            let values = if best_only {
                let best = reports
                    .iter()
                    .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
                    .expect("non-empty");
                METRICS.iter().map(|(_, f)| f(best)).collect()
            } else {
                METRICS
                    .iter()
                    .map(|(_, f)| reports.iter().map(|r| f(r)).sum::<f64>() / reports.len() as f64)
                    .collect()
            };
            (seed, values)
        })
        .collect()
}

fn aggregate(values: &[f64]) -> Aggregate {
    Aggregate {
        mean: mean(values),
        std: sample_std(values),
        n: values.len(),
    }
}

/// Rows of both table variants.
pub fn metric_rows(result: &ExperimentResult) -> Vec<MetricRow> {
    let base = completed(result, Setup::Baseline);
    let fair = completed(result, Setup::FairnessAware);
    let complete = [Setup::Baseline, Setup::FairnessAware]
        .iter()
        .filter(|s| result.plan.setups.contains(s))
        .all(|&s| completed(result, s).len() == result.expected_runs());
    let mut rows = Vec::new();
    for (variant, best_only) in [("avg_of_folds", false), ("best_per_run", true)] {
        let b = per_seed(&base, best_only);
        let f = per_seed(&fair, best_only);
        for (m, (name, _)) in METRICS.iter().enumerate() {
            let bv: Vec<f64> = b.values().map(|v| v[m]).collect();
            let fv: Vec<f64> = f.values().map(|v| v[m]).collect();
            let (pb, pf): (Vec<f64>, Vec<f64>) = b
                .iter()
                .filter_map(|(seed, v)| f.get(seed).map(|w| (v[m], w[m])))
                .unzip();
            let verdict = (!pb.is_empty())
                .then(|| significance(&pb, &pf, METRICS.len()).ok())
                .flatten();
            let (ba, fa) = (aggregate(&bv), aggregate(&fv));
            rows.push(MetricRow {
                variant,
                metric: name,
                pct_change: ba.mean.zip(fa.mean).and_then(|(x, y)| pct_change(x, y)),
                baseline: ba,
                fair: fa,
                verdict,
                complete,
            });
        }
    }
    rows
}

fn fairness_mean(r: &FitnessReport) -> f64 {
    (r.fairness.dp + r.fairness.eo + r.fairness.abroca) / 3.0
}

fn performance_mean(r: &FitnessReport) -> f64 {
    ((r.performance.mcc + 1.0) / 2.0 + r.performance.tpr) / 2.0
}

fn setups_present(result: &ExperimentResult) -> Vec<Setup> {
    let mut s = result.plan.setups.clone();
    s.sort();
    s.dedup();
    s
}

struct Csv {
    out: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(header: &[&str]) -> Result<Self> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(header)?;
        Ok(Self { out })
    }

    fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        self.out.write_record(fields.iter().map(|f| f.as_ref()))?;
        Ok(())
    }

    fn save(self, path: &Path) -> Result<()> {
        let bytes = self.out.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        fs::write(path, bytes)?;
        Ok(())
    }
}

fn table4(result: &ExperimentResult) -> Result<Csv> {
    let mut csv = Csv::new(&[
        "variant", "metric", "baseline_mean", "baseline_std", "baseline_n", "fair_mean",
        "fair_std", "fair_n", "pct_change", "test", "p_value", "threshold", "significant",
        "expected_runs", "complete",
    ])?;
    for row in metric_rows(result) {
        let v = row.verdict.as_ref();
        csv.row(&[
            row.variant.to_string(),
            row.metric.to_string(),
            opt(row.baseline.mean),
            opt(row.baseline.std),
            row.baseline.n.to_string(),
            opt(row.fair.mean),
            opt(row.fair.std),
            row.fair.n.to_string(),
            opt(row.pct_change),
            v.map_or(NA.into(), |v| v.test.as_str().to_string()),
            opt(v.map(|v| v.p_value)),
            opt(v.map(|v| v.threshold)),
            v.map_or(NA.into(), |v| v.significant.to_string()),
            result.expected_runs().to_string(),
            row.complete.to_string(),
        ])?;
    }
    Ok(csv)
}

fn scatter(result: &ExperimentResult) -> Result<Csv> {
    let mut csv = Csv::new(&[
        "setup", "seed", "fold", "fairness_mean", "performance_mean", "pearson_r_setup",
        "pearson_r_all",
    ])?;
    let setups = setups_present(result);
    let points = |s: Setup| -> Vec<(usize, usize, f64, f64)> {
        completed(result, s)
            .into_iter()
            .map(|r| {
                let t = r.test.as_ref().unwrap();
                (r.seed_index, r.fold, fairness_mean(t), performance_mean(t))
            })
            .collect()
    };
    let all: Vec<_> = setups.iter().flat_map(|&s| points(s)).collect();
    let r_all = pearson(
        &all.iter().map(|p| p.2).collect::<Vec<_>>(),
        &all.iter().map(|p| p.3).collect::<Vec<_>>(),
    );
    for &s in &setups {
        let pts = points(s);
        let r = pearson(
            &pts.iter().map(|p| p.2).collect::<Vec<_>>(),
            &pts.iter().map(|p| p.3).collect::<Vec<_>>(),
        );
        for (seed, fold, fm, pm) in pts {
            csv.row(&[
                s.as_str().to_string(),
                seed.to_string(),
                fold.to_string(),
                format_number(fm),
                format_number(pm),
                opt(r),
                opt(r_all),
            ])?;
        }
    }
    Ok(csv)
}

fn counts(result: &ExperimentResult) -> Result<(Csv, Csv, Csv)> {
    let mut dr = Csv::new(&["setup", "dr_mode", "count"])?;
    let mut feats = Csv::new(&["setup", "feature", "sensitive", "count"])?;
    let mut models = Csv::new(&["setup", "model", "count"])?;
    for s in setups_present(result) {
        let runs = completed(result, s);
        let summaries: Vec<_> = runs.iter().filter_map(|r| r.summary.as_ref()).collect();
        for mode in DrMode::ALL {
            let n = summaries.iter().filter(|x| x.dr_mode == mode).count();
            dr.row(&[s.as_str(), mode.as_str(), &n.to_string()])?;
        }
        for (name, sensitive) in result.meta.feature_names.iter().zip(&result.meta.sensitive) {
            let n = summaries.iter().filter(|x| x.features.contains(name)).count();
            feats.row(&[s.as_str(), name, &sensitive.to_string(), &n.to_string()])?;
        }
        for id in ModelId::ALL {
            let n = summaries.iter().filter(|x| x.model_id == id).count();
            models.row(&[s.as_str(), id.as_str(), &n.to_string()])?;
        }
    }
    Ok((dr, feats, models))
}

fn evolution(result: &ExperimentResult) -> Result<Csv> {
    let mut csv = Csv::new(&[
        "setup", "generation", "n_runs", "mean_fitness", "best_fitness", "mcc", "tpr", "dp",
        "eo", "abroca",
    ])?;
    for s in setups_present(result) {
        let traces: Vec<_> = completed(result, s)
            .into_iter()
            .map(|r| &r.trace)
            .filter(|t| !t.is_empty())
            .collect();
        let Some(min_len) = traces.iter().map(|t| t.len()).min() else {
            continue;
        };
        let n = traces.len() as f64;
        for g in 0..min_len {
            let avg = |f: &dyn Fn(&crate::search::GenerationTrace) -> f64| {
                format_number(traces.iter().map(|t| f(&t[g])).sum::<f64>() / n)
            };
            csv.row(&[
                s.as_str().to_string(),
                g.to_string(),
                traces.len().to_string(),
                avg(&|t| t.mean_fitness),
                avg(&|t| t.best.fitness),
                avg(&|t| t.mcc),
                avg(&|t| t.tpr),
                avg(&|t| t.dp),
                avg(&|t| t.eo),
                avg(&|t| t.abroca),
            ])?;
        }
    }
    Ok(csv)
}

fn sensitive_table(result: &ExperimentResult) -> Result<Csv> {
    let mut csv = Csv::new(&[
        "attribute", "category", "least_represented", "original", "setup", "mean", "std", "n",
    ])?;
    for (attr, original) in &result.meta.original_sensitive_props {
        let minority = original
            .iter()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
            .map(|(k, _)| k.clone());
        for (category, p) in original {
            for s in setups_present(result) {
                let values: Vec<f64> = completed(result, s)
                    .into_iter()
                    .filter_map(|r| r.sensitive_props.get(attr))
                    .map(|props| props.get(category).copied().unwrap_or(0.0))
                    .collect();
                csv.row(&[
                    attr.clone(),
                    category.clone(),
                    (minority.as_ref() == Some(category)).to_string(),
                    format_number(*p),
                    s.as_str().to_string(),
                    opt(mean(&values)),
                    opt(sample_std(&values)),
                    values.len().to_string(),
                ])?;
            }
        }
    }
    Ok(csv)
}

/// Writes the aggregate CSVs into `out_dir`. Output depends only on the
/// records, so reloading persisted artifacts reproduces it byte for byte.
pub fn emit_reports(result: &ExperimentResult, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    table4(result)?.save(&out_dir.join("table4.csv"))?;
    scatter(result)?.save(&out_dir.join("scatter.csv"))?;
    let (dr, feats, models) = counts(result)?;
    dr.save(&out_dir.join("dr_modes.csv"))?;
    feats.save(&out_dir.join("features.csv"))?;
    models.save(&out_dir.join("models.csv"))?;
    evolution(result)?.save(&out_dir.join("evolution.csv"))?;
    sensitive_table(result)?.save(&out_dir.join("sensitive_props.csv"))?;
    Ok(())
}
