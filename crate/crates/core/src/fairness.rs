//! Intersectional subgroups and group-fairness distances.
//!
//! Subgroups are the cross-product of the observed categories of every
//! sensitive attribute; empty combinations are dropped. Each distance is the
//! spread (max minus min) of a per-group rate, so 0 means parity.
//!
//! Groups with fewer than [`MIN_SUPPORT`] rows are excluded from demographic
//! parity. Equalised odds and ABROCA only use groups with at least
//! [`MIN_SUPPORT_ROC`] rows and both classes present. When fewer than two
//! groups qualify the distance is 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Encoder, TabularDataset};
use crate::error::{Error, Result};
use crate::metrics::{self, RocPoint};

pub const MIN_SUPPORT: usize = 2;
pub const MIN_SUPPORT_ROC: usize = 4;
/// Number of equispaced FPR points used to compare ROC curves.
pub const ABROCA_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSupport {
    pub n: usize,
    pub n_positive: usize,
}

impl GroupSupport {
    fn has_both_classes(&self) -> bool {
        self.n_positive > 0 && self.n_positive < self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupIndex {
    attributes: Vec<String>,
    categories: Vec<Vec<String>>,
    assignment: Vec<usize>,
    support: Vec<GroupSupport>,
}

impl SubgroupIndex {
    /// Builds groups from one category key per row (one entry per attribute).
    pub fn from_keys(attributes: &[String], keys: &[Vec<String>], labels: &[u8]) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Config("no sensitive attributes declared".into()));
        }
        if keys.len() != labels.len() {
            return Err(Error::Contract(format!(
                "{} group keys for {} labels",
                keys.len(),
                labels.len()
            )));
        }
        if let Some(k) = keys.iter().find(|k| k.len() != attributes.len()) {
            return Err(Error::Contract(format!(
                "group key {k:?} does not match {} attributes",
                attributes.len()
            )));
        }
        let mut ids: BTreeMap<&Vec<String>, usize> = keys.iter().map(|k| (k, 0)).collect();
        for (i, id) in ids.values_mut().enumerate() {
            *id = i;
        }
        let categories: Vec<Vec<String>> = ids.keys().map(|k| (*k).clone()).collect();
        let mut support = vec![GroupSupport { n: 0, n_positive: 0 }; categories.len()];
        let assignment: Vec<usize> = keys
            .iter()
            .zip(labels)
            .map(|(k, &y)| {
                let g = ids[k];
                support[g].n += 1;
                support[g].n_positive += usize::from(y != 0);
                g
            })
            .collect();
        Ok(Self {
            attributes: attributes.to_vec(),
            categories,
            assignment,
            support,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.categories.len()
    }

    pub fn n_rows(&self) -> usize {
        self.assignment.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn support(&self) -> &[GroupSupport] {
        &self.support
    }

    /// (attribute, category) pairs describing group `g`.
    pub fn descriptor(&self, g: usize) -> Vec<(String, String)> {
        self.attributes
            .iter()
            .cloned()
            .zip(self.categories[g].iter().cloned())
            .collect()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.assignment.len() {
            return Err(Error::Contract(format!(
                "{n} values for {} grouped rows",
                self.assignment.len()
            )));
        }
        Ok(())
    }

    fn roc_eligible(&self) -> Vec<usize> {
        (0..self.n_groups())
            .filter(|&g| self.support[g].n >= MIN_SUPPORT_ROC && self.support[g].has_both_classes())
            .collect()
    }

    fn rows_by_group(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.n_groups()];
        for (r, &g) in self.assignment.iter().enumerate() {
            rows[g].push(r);
        }
        rows
    }
}

/// Groups `rows` of `ds` by its sensitive columns. Missing categories take
/// the encoder's fitted mode.
pub fn build_subgroups(
    ds: &TabularDataset,
    rows: &[usize],
    encoder: &Encoder,
) -> Result<SubgroupIndex> {
    let sensitive = ds.sensitive_indices();
    if sensitive.is_empty() {
        return Err(Error::Config("no sensitive attributes declared".into()));
    }
    let names: Vec<String> = sensitive
        .iter()
        .map(|&c| ds.feature(c).spec.name.clone())
        .collect();
    let keys: Vec<Vec<String>> = rows
        .iter()
        .map(|&r| {
            sensitive
                .iter()
                .map(|&c| {
                    let code = encoder
                        .imputed_code(ds, c, r)
                        .expect("sensitive columns are categorical");
                    match &ds.feature(c).data {
                        crate::data::ColumnData::Categorical { levels, .. } => {
                            levels[code as usize].clone()
                        }
                        crate::data::ColumnData::Numeric(_) => unreachable!(),
                    }
                })
                .collect()
        })
        .collect();
    let labels: Vec<u8> = rows.iter().map(|&r| ds.labels()[r]).collect();
    SubgroupIndex::from_keys(&names, &keys, &labels)
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi, n) = values.fold((f64::INFINITY, f64::NEG_INFINITY, 0usize), |(lo, hi, n), v| {
        (lo.min(v), hi.max(v), n + 1)
    });
    if n < 2 {
        0.0
    } else {
        hi - lo
    }
}

/// Spread of per-group selection rates.
pub fn demographic_parity(preds: &[u8], sg: &SubgroupIndex) -> Result<f64> {
    sg.check_len(preds.len())?;
    let mut positives = vec![0usize; sg.n_groups()];
    for (&p, &g) in preds.iter().zip(sg.assignment()) {
        positives[g] += usize::from(p != 0);
    }
    Ok(spread(
        (0..sg.n_groups())
            .filter(|&g| sg.support[g].n >= MIN_SUPPORT)
            .map(|g| positives[g] as f64 / sg.support[g].n as f64),
    ))
}

/// Larger of the per-group TPR spread and FPR spread.
pub fn equalized_odds(preds: &[u8], labels: &[u8], sg: &SubgroupIndex) -> Result<f64> {
    sg.check_len(preds.len())?;
    sg.check_len(labels.len())?;
    let mut counts = vec![metrics::ConfusionCounts::default(); sg.n_groups()];
    for ((&p, &y), &g) in preds.iter().zip(labels).zip(sg.assignment()) {
        let c = &mut counts[g];
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let eligible = sg.roc_eligible();
    let tpr_spread = spread(eligible.iter().map(|&g| metrics::tpr(&counts[g])));
    let fpr_spread = spread(eligible.iter().map(|&g| metrics::fpr(&counts[g])));
    Ok(tpr_spread.max(fpr_spread))
}

/// Evaluates a ROC curve at `fpr`. On vertical segments the upper point is
/// taken; elsewhere the curve is linear between points.
pub fn roc_tpr_at(points: &[RocPoint], fpr: f64) -> f64 {
    let j = points.partition_point(|p| p.fpr <= fpr);
    if j == 0 {
        return points[0].tpr;
    }
    let lo = points[j - 1];
    if lo.fpr == fpr || j == points.len() {
        return lo.tpr;
    }
    let hi = points[j];
    lo.tpr + (hi.tpr - lo.tpr) * (fpr - lo.fpr) / (hi.fpr - lo.fpr)
}

fn grid_curve(points: &[RocPoint]) -> Vec<f64> {
    (0..ABROCA_GRID)
        .map(|i| roc_tpr_at(points, i as f64 / (ABROCA_GRID - 1) as f64))
        .collect()
}

/// Trapezoidal area of `|a - b|` over the unit grid.
fn grid_area(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let last = d.len() - 1;
    (d.iter().sum::<f64>() - (d[0] + d[last]) / 2.0) / last as f64
}

/// Largest pairwise absolute area between group ROC curves, each curve
/// sampled on a shared 101-point FPR grid.
pub fn abroca(scores: &[f64], labels: &[u8], sg: &SubgroupIndex) -> Result<f64> {
    sg.check_len(scores.len())?;
    sg.check_len(labels.len())?;
    let by_group = sg.rows_by_group();
    let curves: Vec<Vec<f64>> = sg
        .roc_eligible()
        .into_iter()
        .map(|g| {
            let s: Vec<f64> = by_group[g].iter().map(|&r| scores[r]).collect();
            let y: Vec<u8> = by_group[g].iter().map(|&r| labels[r]).collect();
            metrics::roc_curve(&s, &y).map(|pts| grid_curve(&pts))
        })
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            best = best.max(grid_area(a, b));
        }
    }
    Ok(best.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessBundle {
    pub dp: f64,
    pub eo: f64,
    pub abroca: f64,
    pub fairness_component: f64,
    pub evaluated_groups: usize,
}

impl FairnessBundle {
    pub fn worst() -> Self {
        Self {
            dp: 1.0,
            eo: 1.0,
            abroca: 1.0,
            fairness_component: 1.0,
            evaluated_groups: 0,
        }
    }
}

/// Mean of the three distances.
pub fn fairness_component(dp: f64, eo: f64, abroca: f64) -> Result<f64> {
    for (name, v) in [("DP", dp), ("EO", eo), ("ABROCA", abroca)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok((dp + eo + abroca) / 3.0)
}

pub fn fairness_bundle(scores: &[f64], labels: &[u8], sg: &SubgroupIndex) -> Result<FairnessBundle> {
    let preds = metrics::hard_predictions(scores);
    let dp = demographic_parity(&preds, sg)?;
    let eo = equalized_odds(&preds, labels, sg)?;
    let ab = abroca(scores, labels, sg)?;
    Ok(FairnessBundle {
        dp,
        eo,
        abroca: ab,
        fairness_component: fairness_component(dp, eo, ab)?,
        evaluated_groups: sg.support.iter().filter(|s| s.n >= MIN_SUPPORT).count(),
    })
}
