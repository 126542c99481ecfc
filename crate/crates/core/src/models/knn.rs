use super::KnnWeighting;
use crate::data::Matrix;

/// Brute-force k-nearest neighbours with Euclidean distance. All training
/// rows tied with the k-th distance vote.
#[derive(Debug, Clone)]
pub struct Knn {
    x: Matrix,
    y: Vec<u8>,
    k: usize,
    weighting: KnnWeighting,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[u8], k: usize, weighting: KnnWeighting) -> Self {
        Self {
            x: x.clone(),
            y: y.to_vec(),
            k: k.clamp(1, x.rows()),
            weighting,
        }
    }

    fn score_row(&self, row: &[f64], dist: &mut Vec<(f64, u8)>) -> f64 {
        dist.clear();
        dist.extend((0..self.x.rows()).map(|r| {
            let d2: f64 = self.x.row(r).iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
            (d2.sqrt(), self.y[r])
        }));
        dist.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0));
        let kth = dist[self.k - 1].0;
        let (mut total, mut positive) = (0.0, 0.0);
        for &(d, label) in dist.iter().filter(|(d, _)| *d <= kth) {
            let w = match self.weighting {
                KnnWeighting::Uniform => 1.0,
                KnnWeighting::InverseDistance => 1.0 / (d + 1e-9),
            };
            total += w;
            if label != 0 {
                positive += w;
            }
        }
        positive / total
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        let mut dist = Vec::with_capacity(self.x.rows());
        (0..x.rows()).map(|r| self.score_row(x.row(r), &mut dist)).collect()
    }
}
