//! Predictive-performance metrics and the performance component of the
//! fitness.
//!
//! Degenerate cases never fail: MCC with a zero denominator factor, F1 with a
//! zero denominator and TPR without positives are all reported as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score threshold for hard predictions.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceBundle {
    pub mcc: f64,
    pub nmcc: f64,
    pub tpr: f64,
    pub f1: f64,
    pub aucroc: f64,
    pub performance_component: f64,
}

impl PerformanceBundle {
    /// The worst possible bundle, used for failed evaluations.
    pub fn worst() -> Self {
        Self {
            mcc: -1.0,
            nmcc: 1.0,
            tpr: 0.0,
            f1: 0.0,
            aucroc: 0.0,
            performance_component: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

pub fn hard_predictions(scores: &[f64]) -> Vec<u8> {
    scores
        .iter()
        .map(|&s| u8::from(s >= DECISION_THRESHOLD))
        .collect()
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionCounts> {
    if preds.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("no predictions".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0.0) {
        return 0.0;
    }
    let denom = factors.iter().product::<f64>().sqrt();
    ((tp * tn - fp * fn_) / denom).clamp(-1.0, 1.0)
}

/// Normalised, inverted MCC: 0 for a perfect classifier, 1 for a perfectly
/// inverted one.
pub fn nmcc(mcc_value: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&mcc_value) {
        return Err(Error::Contract(format!("MCC {mcc_value} outside [-1, 1]")));
    }
    Ok(1.0 - (mcc_value + 1.0) / 2.0)
}

pub fn tpr(c: &ConfusionCounts) -> f64 {
    let p = c.tp + c.fn_;
    if p == 0 {
        0.0
    } else {
        c.tp as f64 / p as f64
    }
}

pub fn fpr(c: &ConfusionCounts) -> f64 {
    let n = c.fp + c.tn;
    if n == 0 {
        0.0
    } else {
        c.fp as f64 / n as f64
    }
}

pub fn f1(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

/// ROC curve from a descending threshold sweep, starting at (0, 0) and ending
/// at (1, 1). Equal scores form a single threshold step.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&y| y != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn roc_and_auc(scores: &[f64], labels: &[u8]) -> Result<(Vec<RocPoint>, f64)> {
    let points = roc_curve(scores, labels)?;
    let auc = trapezoid_auc(&points);
    Ok((points, auc))
}

/// Mean of the inverted normalised MCC and the false-negative share of
/// positives. 0 is best.
pub fn performance_component(mcc_value: f64, tpr_value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tpr_value) {
        return Err(Error::Contract(format!("TPR {tpr_value} outside [0, 1]")));
    }
    Ok((nmcc(mcc_value)? + (1.0 - tpr_value)) / 2.0)
}

/// All performance metrics for a set of scores. AUC falls back to 0.5 when
/// only one class is present.
pub fn performance_bundle(scores: &[f64], labels: &[u8]) -> Result<PerformanceBundle> {
    let preds = hard_predictions(scores);
    let c = confusion(&preds, labels)?;
    let mcc_value = mcc(&c);
    let tpr_value = tpr(&c);
    let aucroc = match roc_and_auc(scores, labels) {
        Ok((_, auc)) => auc,
        Err(Error::Metric(_)) => 0.5,
        Err(e) => return Err(e),
    };
    Ok(PerformanceBundle {
        mcc: mcc_value,
        nmcc: nmcc(mcc_value)?,
        tpr: tpr_value,
        f1: f1(&c),
        aucroc,
        performance_component: performance_component(mcc_value, tpr_value)?,
    })
}
