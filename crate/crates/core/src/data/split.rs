use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&r| self.assignments[r] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&r| self.assignments[r] != fold)
            .collect()
    }
}

fn class_rows(rows: &[usize], labels: &[u8]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &r in rows {
        out[labels[r] as usize].push(r);
    }
    out
}

/// Splits `total` across classes proportionally to their sizes using the
/// largest-remainder rule. With `min_one`, every non-empty class receives at
/// least one slot when `total` allows it.
fn allocate(total: usize, sizes: [usize; 2], min_one: bool) -> [usize; 2] {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return [0, 0];
    }
    let quotas = sizes.map(|s| total as f64 * s as f64 / n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = total - counts.iter().sum::<usize>();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(4) {
        if left == 0 {
            break;
        }
        if counts[c] < sizes[c] {
            counts[c] += 1;
            left -= 1;
        }
    }
    if min_one && total >= 2 {
        for c in 0..2 {
            let other = 1 - c;
            if sizes[c] > 0 && counts[c] == 0 && counts[other] > 1 {
                counts[c] += 1;
                counts[other] -= 1;
            }
        }
    }
    counts
}

/// Stratified `k`-fold assignment. Each class is shuffled and dealt
/// round-robin, so per-fold class counts differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Split(format!("k must be at least 2, got {k}")));
    }
    let rows: Vec<usize> = (0..labels.len()).collect();
    let mut classes = class_rows(&rows, labels);
    for (c, members) in classes.iter().enumerate() {
        if members.len() < k {
            return Err(Error::Split(format!(
                "class {c} has {} rows, fewer than k = {k}",
                members.len()
            )));
        }
    }
    let mut rng = rng::derived_rng(seed, &[0x4b46]);
    let mut assignments = vec![0; labels.len()];
    let mut slot = 0;
    for members in classes.iter_mut() {
        members.shuffle(&mut rng);
        for &r in members.iter() {
            assignments[r] = slot % k;
            slot += 1;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}

/// Label-stratified split of `rows` into (train, validation), where the
/// validation part holds `round(fraction * n)` rows.
pub fn train_validation_split(
    rows: &[usize],
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("fraction must be in (0, 1), got {fraction}")));
    }
    let n = rows.len();
    let n_val = (fraction * n as f64).round() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::Split(format!(
            "fraction {fraction} of {n} rows leaves an empty subset"
        )));
    }
    let mut classes = class_rows(rows, labels);
    let counts = allocate(n_val, [classes[0].len(), classes[1].len()], false);
    let mut rng = rng::derived_rng(seed, &[0x5456]);
    let mut train = Vec::with_capacity(n - n_val);
    let mut validation = Vec::with_capacity(n_val);
    for (members, &take) in classes.iter_mut().zip(counts.iter()) {
        members.shuffle(&mut rng);
        validation.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok((train, validation))
}

/// Label-stratified random subset of `size` rows, returned in ascending
/// order. Each class present in `rows` keeps at least one row when `size`
/// allows it.
pub fn stratified_subsample(rows: &[usize], labels: &[u8], size: usize, seed: u64) -> Vec<usize> {
    let size = size.min(rows.len());
    let mut classes = class_rows(rows, labels);
    let counts = allocate(size, [classes[0].len(), classes[1].len()], true);
    let mut rng = rng::rng_from(seed);
    let mut out = Vec::with_capacity(size);
    for (members, &take) in classes.iter_mut().zip(counts.iter()) {
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..take]);
    }
    out.sort_unstable();
    out
}
