use rand::seq::index;

use crate::data::Matrix;
use crate::rng::{self, Rng};

/// Upper bound on candidate thresholds per feature.
const MAX_BINS: usize = 64;

/// Features quantised into at most [`MAX_BINS`] ordered bins.
///
/// `bin(x) <= t` holds exactly when `x <= thresholds[t]`, so splits learned on
/// bins apply unchanged to raw values. Features with few distinct values get
/// one bin per value, which makes splits on them exact.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    /// Column-major bin codes.
    bins: Vec<u8>,
    thresholds: Vec<Vec<f64>>,
    rows: usize,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix) -> Self {
        let rows = x.rows();
        let mut bins = vec![0u8; rows * x.cols()];
        let mut thresholds = Vec::with_capacity(x.cols());
        let mut column = Vec::with_capacity(rows);
        for c in 0..x.cols() {
            column.clear();
            column.extend((0..rows).map(|r| x.get(r, c)));
            let cuts = cut_points(&column);
            for (r, &v) in column.iter().enumerate() {
                bins[c * rows + r] = cuts.partition_point(|&t| t < v) as u8;
            }
            thresholds.push(cuts);
        }
        Self {
            bins,
            thresholds,
            rows,
        }
    }

    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    #[inline]
    fn column(&self, c: usize) -> &[u8] {
        &self.bins[c * self.rows..(c + 1) * self.rows]
    }
}

fn cut_points(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let midpoint = |i: usize| (distinct[i].0 + distinct[i + 1].0) / 2.0;
    if distinct.len() <= MAX_BINS {
        return (0..distinct.len().saturating_sub(1)).map(midpoint).collect();
    }
    // Equal-frequency cuts between distinct values.
    let n = values.len();
    let mut cuts = Vec::with_capacity(MAX_BINS - 1);
    let mut seen = 0;
    let mut next_q = 1;
    for (i, &(_, count)) in distinct.iter().enumerate().take(distinct.len() - 1) {
        seen += count;
        if seen * MAX_BINS >= next_q * n {
            cuts.push(midpoint(i));
            while next_q * n <= seen * MAX_BINS {
                next_q += 1;
            }
            if cuts.len() == MAX_BINS - 1 {
                break;
            }
        }
    }
    cuts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree with Gini impurity. Leaves score the positive
/// fraction of their training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn gini_weighted(n: f64, pos: f64) -> f64 {
    // n * gini = n * (1 - p^2 - (1-p)^2) = 2 * pos * (n - pos) / n
    if n == 0.0 {
        0.0
    } else {
        2.0 * pos * (n - pos) / n
    }
}

struct Builder<'a> {
    binned: &'a BinnedMatrix,
    y: &'a [u8],
    params: TreeParams,
    rng: Rng,
    nodes: Vec<Node>,
    counts: Vec<[usize; 2]>,
}

struct BestSplit {
    feature: usize,
    bin: usize,
    impurity: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r] != 0).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            score: pos as f64 / n as f64,
        });
        if depth >= self.params.max_depth
            || pos == 0
            || pos == n
            || n < 2 * self.params.min_leaf.max(1)
        {
            return id;
        }
        let Some(best) = self.best_split(rows, pos) else {
            return id;
        };
        let column = self.binned.column(best.feature);
        let bin = best.bin as u8;
        let mut split = 0;
        for i in 0..n {
            if column[rows[i]] <= bin {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(split);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: self.binned.thresholds[best.feature][best.bin],
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.binned.n_features();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = index::sample(&mut self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], pos: usize) -> Option<BestSplit> {
        let n = rows.len();
        let parent = gini_weighted(n as f64, pos as f64);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let n_cuts = self.binned.thresholds[f].len();
            if n_cuts == 0 {
                continue;
            }
            let counts = &mut self.counts[..=n_cuts];
            counts.fill([0, 0]);
            let column = self.binned.column(f);
            for &r in rows {
                counts[column[r] as usize][usize::from(self.y[r] != 0)] += 1;
            }
            let (mut ln, mut lp) = (0usize, 0usize);
            for (t, c) in counts.iter().take(n_cuts).enumerate() {
                ln += c[0] + c[1];
                lp += c[1];
                let rn = n - ln;
                if ln < min_leaf {
                    continue;
                }
                if rn < min_leaf {
                    break;
                }
                let impurity = gini_weighted(ln as f64, lp as f64)
                    + gini_weighted(rn as f64, (pos - lp) as f64);
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        bin: t,
                        impurity,
                    });
                }
            }
        }
        best.filter(|b| b.impurity < parent - 1e-12)
    }
}

impl DecisionTree {
    /// Fits on every row of `x`.
    pub fn fit(x: &Matrix, y: &[u8], params: TreeParams, seed: u64) -> Self {
        let rows: Vec<usize> = (0..x.rows()).collect();
        Self::fit_on_rows(&BinnedMatrix::new(x), y, rows, params, seed)
    }

    /// Fits on `rows` (repeats allowed) of a pre-binned matrix.
    pub fn fit_on_rows(
        binned: &BinnedMatrix,
        y: &[u8],
        mut rows: Vec<usize>,
        params: TreeParams,
        seed: u64,
    ) -> Self {
        let mut builder = Builder {
            binned,
            y,
            params,
            rng: rng::rng_from(seed),
            nodes: Vec::new(),
            counts: vec![[0, 0]; MAX_BINS],
        };
        builder.grow(&mut rows, 0);
        Self {
            nodes: builder.nodes,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { score } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.score_row(x.row(r))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_respect_thresholds() {
        let x = Matrix::from_rows(&(0..500).map(|i| vec![(i % 137) as f64 * 0.5]).collect::<Vec<_>>()).unwrap();
        let b = BinnedMatrix::new(&x);
        let cuts = &b.thresholds[0];
        assert!(cuts.len() < MAX_BINS);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        for r in 0..x.rows() {
            let bin = b.column(0)[r] as usize;
            let v = x.get(r, 0);
            for (t, &cut) in cuts.iter().enumerate() {
                assert_eq!(bin <= t, v <= cut);
            }
        }
    }

    #[test]
    fn xor_has_no_greedy_split() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 2) as f64, ((i / 2) % 2) as f64])
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] != r[1])).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let params = TreeParams {
            max_depth: 2,
            min_leaf: 1,
            max_features: None,
        };
        // Gini gain of any single split on XOR is zero, so the tree stays a stump.
        let tree = DecisionTree::fit(&x, &y, params, 0);
        assert_eq!(tree.n_nodes(), 1);
    }

    #[test]
    fn min_leaf_limits_splits() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i == 19)).collect();
        let params = TreeParams {
            max_depth: 8,
            min_leaf: 5,
            max_features: None,
        };
        let tree = DecisionTree::fit(&x, &y, params, 0);
        let scores = tree.predict_scores(&x);
        assert!(scores[19] < 1.0);
        assert!((scores[19] - 0.2).abs() < 1e-12);
    }
}
