//! Reference implementations used as test oracles. They follow the metric
//! definitions directly and share no code with the library.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use fairevo::data::{parse_csv, ColumnKind, ColumnSpec, Schema, TabularDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// MCC as the Pearson correlation of the prediction and label vectors.
pub fn mcc_oracle(preds: &[u8], labels: &[u8]) -> f64 {
    let n = preds.len() as f64;
    let p: Vec<f64> = preds.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let mp = p.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = p.iter().zip(&y).map(|(a, b)| (a - mp) * (b - my)).sum();
    let vp: f64 = p.iter().map(|a| (a - mp).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vp == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vp * vy).sqrt()
    }
}

pub fn tpr_oracle(preds: &[u8], labels: &[u8]) -> f64 {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    if pos.is_empty() {
        return 0.0;
    }
    pos.iter().filter(|&&i| preds[i] == 1).count() as f64 / pos.len() as f64
}

pub fn f1_oracle(preds: &[u8], labels: &[u8]) -> f64 {
    let predicted: Vec<usize> = (0..preds.len()).filter(|&i| preds[i] == 1).collect();
    let hits = predicted.iter().filter(|&&i| labels[i] == 1).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
    let recall = tpr_oracle(preds, labels);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Rows of each group, keyed by the joined category key.
pub fn groups(keys: &[Vec<String>]) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        out.entry(k.join("\u{1f}")).or_default().push(i);
    }
    out
}

fn spread(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

fn roc_eligible(rows: &[usize], labels: &[u8]) -> bool {
    let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
    rows.len() >= 4 && pos > 0 && pos < rows.len()
}

pub fn dp_oracle(preds: &[u8], keys: &[Vec<String>]) -> f64 {
    let rates: Vec<f64> = groups(keys)
        .values()
        .filter(|rows| rows.len() >= 2)
        .map(|rows| rows.iter().filter(|&&i| preds[i] == 1).count() as f64 / rows.len() as f64)
        .collect();
    spread(&rates)
}

pub fn eo_oracle(preds: &[u8], labels: &[u8], keys: &[Vec<String>]) -> f64 {
    let mut tprs = Vec::new();
    let mut fprs = Vec::new();
    for rows in groups(keys).values().filter(|r| roc_eligible(r, labels)) {
        let p: Vec<u8> = rows.iter().map(|&i| preds[i]).collect();
        let y: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        tprs.push(tpr_oracle(&p, &y));
        fprs.push(tpr_oracle(&p, &flipped));
    }
    spread(&tprs).max(spread(&fprs))
}

/// ROC points from every distinct threshold, highest first, starting at (0,0).
pub fn roc_oracle(scores: &[f64], labels: &[u8]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i] == 1).count() as f64;
        let fp = (0..scores.len()).filter(|&i| scores[i] >= t && labels[i] == 0).count() as f64;
        pts.push((fp / neg, tp / pos));
    }
    pts
}

/// TPR at `x`: the top of any vertical segment at `x`, else linear between
/// the neighbouring points.
pub fn roc_at(pts: &[(f64, f64)], x: f64) -> f64 {
    let at: Vec<f64> = pts.iter().filter(|p| p.0 == x).map(|p| p.1).collect();
    if !at.is_empty() {
        return at.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    let left = pts.iter().filter(|p| p.0 < x).max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap())).unwrap();
    let right = pts.iter().filter(|p| p.0 > x).min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap())).unwrap();
    left.1 + (right.1 - left.1) * (x - left.0) / (right.0 - left.0)
}

/// Maximum pairwise trapezoidal area between group curves sampled at `grid`
/// equispaced FPR values.
pub fn abroca_oracle(scores: &[f64], labels: &[u8], keys: &[Vec<String>], grid: usize) -> f64 {
    let curves: Vec<Vec<f64>> = groups(keys)
        .values()
        .filter(|r| roc_eligible(r, labels))
        .map(|rows| {
            let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
            let y: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
            let pts = roc_oracle(&s, &y);
            (0..grid).map(|i| roc_at(&pts, i as f64 / (grid - 1) as f64)).collect()
        })
        .collect();
    let mut best = 0.0f64;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let d: Vec<f64> = curves[i].iter().zip(&curves[j]).map(|(a, b)| (a - b).abs()).collect();
            let inner: f64 = d[1..grid - 1].iter().sum();
            let area = (inner + (d[0] + d[grid - 1]) / 2.0) / (grid - 1) as f64;
            best = best.max(area);
        }
    }
    best
}

/// Exact two-sided signed-rank p-value by enumerating every sign assignment
/// of the ranks of the non-zero differences.
pub fn wilcoxon_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|v| {
            let below = abs.iter().filter(|w| *w < v).count() as f64;
            let equal = abs.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let w_obs: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let total = 1u64 << n;
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0..total {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= w_obs + 1e-9 {
            le += 1;
        }
        if w >= w_obs - 1e-9 {
            ge += 1;
        }
    }
    let p = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
    (w_obs, p)
}

/// Closed-form paired t statistic.
pub fn t_statistic(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    mean / (sd / n.sqrt())
}

fn col(name: &str, kind: ColumnKind, sensitive: bool, label: bool) -> ColumnSpec {
    ColumnSpec {
        name: name.into(),
        kind,
        is_sensitive: sensitive,
        is_label: label,
    }
}

/// Synthetic table with two sensitive attributes, an informative numeric
/// signal whose strength differs by group, and noise columns.
pub fn synthetic(n: usize, noise: f64, seed: u64) -> TabularDataset {
    let mut r = rng(seed);
    let schema = Schema {
        columns: vec![
            col("sex", ColumnKind::Categorical, true, false),
            col("band", ColumnKind::Categorical, true, false),
            col("x1", ColumnKind::Numeric, false, false),
            col("x2", ColumnKind::Numeric, false, false),
            col("x3", ColumnKind::Numeric, false, false),
            col("colour", ColumnKind::Categorical, false, false),
            col("label", ColumnKind::Categorical, false, true),
        ],
        positive_label: Some("pos".into()),
    };
    let mut csv = String::from("sex,band,x1,x2,x3,colour,label\n");
    for _ in 0..n {
        let sex = if r.gen_bool(0.6) { "m" } else { "f" };
        let band = ["lo", "mid", "hi"][r.gen_range(0..3)];
        let base = if sex == "m" { 0.35 } else { 0.2 };
        let y = r.gen_bool(base);
        let shift = if y { 1.0 } else { -1.0 };
        let x1 = shift + r.gen_range(-noise..noise);
        let x2 = if band == "hi" { shift * 0.5 } else { 0.0 } + r.gen_range(-1.0..1.0);
        let x3: f64 = r.gen_range(-1.0..1.0);
        let colour = ["red", "green", "blue"][r.gen_range(0..3)];
        let x3s = if r.gen_bool(0.03) { String::new() } else { format!("{x3}") };
        csv += &format!("{sex},{band},{x1},{x2},{x3s},{colour},{}\n", if y { "pos" } else { "neg" });
    }
    parse_csv(csv.as_bytes(), &schema).expect("synthetic data parses")
}
