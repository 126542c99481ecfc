use crate::data::Matrix;

/// Gaussian naive Bayes. Each class variance is inflated by
/// `var_smoothing` times the largest feature variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: &Matrix, y: &[u8], var_smoothing: f64) -> Self {
        let d = x.cols();
        let n = x.rows() as f64;
        let mut count = [0.0f64; 2];
        let mut sum = [vec![0.0; d], vec![0.0; d]];
        for (r, &label) in y.iter().enumerate() {
            let c = usize::from(label != 0);
            count[c] += 1.0;
            for (s, v) in sum[c].iter_mut().zip(x.row(r)) {
                *s += v;
            }
        }
        let mean = [0, 1].map(|c| sum[c].iter().map(|s| s / count[c].max(1.0)).collect::<Vec<_>>());
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (r, &label) in y.iter().enumerate() {
            let c = usize::from(label != 0);
            for ((v, m), xv) in var[c].iter_mut().zip(&mean[c]).zip(x.row(r)) {
                *v += (xv - m).powi(2);
            }
        }
        for (class_var, n_c) in var.iter_mut().zip(count) {
            for v in class_var.iter_mut() {
                *v /= n_c.max(1.0);
            }
        }
        let overall_max = (0..d)
            .map(|j| {
                let m = (0..x.rows()).map(|r| x.get(r, j)).sum::<f64>() / n;
                (0..x.rows()).map(|r| (x.get(r, j) - m).powi(2)).sum::<f64>() / n
            })
            .fold(0.0, f64::max);
        let eps = (var_smoothing * overall_max).max(1e-12);
        for v in var.iter_mut().flatten() {
            *v += eps;
        }
        Self {
            log_prior: [0, 1].map(|c| (count[c] / n).ln()),
            mean,
            var,
        }
    }

    fn joint_log_likelihood(&self, row: &[f64], c: usize) -> f64 {
        let ll: f64 = row
            .iter()
            .zip(&self.mean[c])
            .zip(&self.var[c])
            .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
            .sum();
        self.log_prior[c] + ll
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|r| {
                let row = x.row(r);
                let l0 = self.joint_log_likelihood(row, 0);
                let l1 = self.joint_log_likelihood(row, 1);
                let m = l0.max(l1);
                let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
                e1 / (e0 + e1)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_class_distributions_give_prior() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 4) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i < 12)).collect();
        // rows 0..12 and 12..40 both cycle evenly through 0..4
        let x = Matrix::from_rows(&rows).unwrap();
        let nb = GaussianNb::fit(&x, &y, 1e-9);
        for s in nb.predict_scores(&x) {
            assert!((s - 0.3).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn larger_smoothing_flattens_scores() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let sharp = GaussianNb::fit(&x, &y, 1e-9).predict_scores(&x);
        let flat = GaussianNb::fit(&x, &y, 1e-3).predict_scores(&x);
        assert!(sharp[19] >= flat[19]);
        assert!(sharp[0] <= flat[0]);
    }
}
