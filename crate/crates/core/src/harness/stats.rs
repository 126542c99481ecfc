//! Paired two-sample tests with a normality gate and Bonferroni correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub const FAMILY_ALPHA: f64 = 0.05;
pub const NORMALITY_ALPHA: f64 = 0.05;
pub const MIN_PAIRS: usize = 5;
/// Largest non-zero pair count for the exact signed-rank distribution.
pub const WILCOXON_EXACT_MAX: usize = 50;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid normal")
}

fn two_sided(lower: f64, upper: f64) -> f64 {
    (2.0 * lower.min(upper)).min(1.0)
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Shapiro-Wilk W and its p-value (Royston's approximation), for
/// 3 <= n <= 5000. Errors when the sample has zero range.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    const G: [f64; 2] = [-2.273, 0.459];
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::Metric(format!("Shapiro-Wilk needs 3..=5000 values, got {n}")));
    }
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    if x[n - 1] - x[0] < 1e-19 {
        return Err(Error::Metric("Shapiro-Wilk undefined for a constant sample".into()));
    }
    let half = n / 2;
    let an = n as f64;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = 0.5f64.sqrt();
    } else {
        let z = std_normal();
        let m: Vec<f64> = (1..=half)
            .map(|i| -z.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = m[0] / ssumm2 + poly(&C1, rsn);
        let (first, fac) = if n > 5 {
            let a2 = m[1] / ssumm2 + poly(&C2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }
    let mean = x.iter().sum::<f64>() / an;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let b: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let w = (b * b / ss).min(1.0);

    if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        return Ok((w, p.max(0.0)));
    }
    let mut y = (1.0 - w).ln();
    let (mu, sigma) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return Ok((w, 1e-99));
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    let p = Normal::new(mu, sigma).expect("valid normal").sf(y);
    Ok((w, p))
}

/// Paired t statistic `mean(d) / (sd(d) / sqrt(n))` with two-sided p-value
/// on `n - 1` degrees of freedom, where `d = a - b`.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let d = differences(a, b)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::Metric("paired t-test needs two pairs".into()));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        });
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("valid t");
    Ok((t, two_sided(dist.cdf(t), dist.sf(t))))
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Average ranks (1-based) of `values`.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on `d = a - b`. Zero differences are dropped.
/// Returns `(W+, two-sided p)`; exact for up to [`WILCOXON_EXACT_MAX`]
/// non-zero pairs (conditional on ties), normal approximation with tie
/// correction beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let d: Vec<f64> = differences(a, b)?.into_iter().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok((0.0, 1.0));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    if n <= WILCOXON_EXACT_MAX {
        // doubled ranks are integers even with ties
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut dist = vec![0.0f64; total + 1];
        dist[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                let p = dist[s] * 0.5;
                dist[s] = p;
                dist[s + r] += p;
            }
            reach += r;
        }
        let obs = (2.0 * w_plus).round() as usize;
        let lower: f64 = dist[..=obs].iter().sum();
        let upper: f64 = dist[obs..].iter().sum();
        return Ok((w_plus, two_sided(lower, upper)));
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean) / var.sqrt();
    let norm = std_normal();
    Ok((w_plus, two_sided(norm.cdf(z), norm.sf(z))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PairedT,
    Wilcoxon,
    /// Fewer than [`MIN_PAIRS`] pairs, or identical samples.
    NotApplicable,
}

impl TestKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestKind::PairedT => "paired_t",
            TestKind::Wilcoxon => "wilcoxon",
            TestKind::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    /// Shapiro-Wilk p-value of the differences, when computed.
    pub normality_p: Option<f64>,
    pub threshold: f64,
    pub significant: bool,
    pub significant_uncorrected: bool,
    pub insufficient: bool,
}

/// Bonferroni-corrected per-metric level.
pub fn bonferroni_threshold(n_metrics: usize) -> f64 {
    FAMILY_ALPHA / n_metrics.max(1) as f64
}

/// Paired comparison: t-test when the differences pass Shapiro-Wilk,
/// Wilcoxon signed-rank otherwise, judged at `0.05 / n_metrics`.
pub fn significance(baseline: &[f64], fair: &[f64], n_metrics: usize) -> Result<Verdict> {
    let d = differences(baseline, fair)?;
    let threshold = bonferroni_threshold(n_metrics);
    let skip = |insufficient| Verdict {
        test: TestKind::NotApplicable,
        statistic: 0.0,
        p_value: 1.0,
        normality_p: None,
        threshold,
        significant: false,
        significant_uncorrected: false,
        insufficient,
    };
    if d.len() < MIN_PAIRS {
        return Ok(skip(true));
    }
    if d.iter().all(|&v| v == 0.0) {
        return Ok(skip(false));
    }
    let normality_p = shapiro_wilk(&d).ok().map(|(_, p)| p);
    let (test, (statistic, p_value)) = match normality_p {
        Some(p) if p > NORMALITY_ALPHA => (TestKind::PairedT, paired_t(baseline, fair)?),
        _ => (TestKind::Wilcoxon, wilcoxon_signed_rank(baseline, fair)?),
    };
    Ok(Verdict {
        test,
        statistic,
        p_value,
        normality_p,
        threshold,
        significant: p_value < threshold,
        significant_uncorrected: p_value < FAMILY_ALPHA,
        insufficient: false,
    })
}
