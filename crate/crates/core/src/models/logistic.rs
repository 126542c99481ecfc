use crate::data::Matrix;

const GRADIENT_TOLERANCE: f64 = 1e-4;

/// L2-regularised logistic regression fitted by full-batch gradient descent
/// for a fixed number of epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    weights: Vec<f64>,
    bias: f64,
    final_gradient_norm: f64,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean log-loss plus `l2 / 2 * ||w||^2`.
pub fn logistic_loss(weights: &[f64], bias: f64, x: &Matrix, y: &[u8], l2: f64) -> f64 {
    let n = x.rows() as f64;
    let data: f64 = (0..x.rows())
        .map(|r| {
            let z = dot(x.row(r), weights) + bias;
            // log(1 + e^z) - y z, computed stably
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - f64::from(y[r]) * z
        })
        .sum();
    data / n + 0.5 * l2 * dot(weights, weights)
}

/// Gradient of [`logistic_loss`] as (weights gradient, bias gradient).
pub fn logistic_gradient(
    weights: &[f64],
    bias: f64,
    x: &Matrix,
    y: &[u8],
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (r, &label) in y.iter().enumerate() {
        let row = x.row(r);
        let err = sigmoid(dot(row, weights) + bias) - f64::from(label);
        gb += err;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += err * v;
        }
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

impl LogisticRegression {
    /// Each epoch takes a gradient step on the data term, then shrinks the
    /// weights by `1 / (1 + step * l2)`. The step is `learning_rate` capped at
    /// the inverse Lipschitz bound of the data term, so any `l2` and
    /// `learning_rate` in range stay stable.
    pub fn fit(x: &Matrix, y: &[u8], l2: f64, epochs: u32, learning_rate: f64) -> Self {
        let n = x.rows().max(1) as f64;
        let mean_sq_norm = (0..x.rows()).map(|r| dot(x.row(r), x.row(r))).sum::<f64>() / n;
        let step = learning_rate.min(4.0 / (mean_sq_norm + 1.0));
        let shrink = 1.0 / (1.0 + step * l2);
        let mut weights = vec![0.0; x.cols()];
        let mut bias = 0.0;
        let mut norm = f64::INFINITY;
        for _ in 0..epochs {
            let (gw, gb) = logistic_gradient(&weights, bias, x, y, l2);
            norm = (dot(&gw, &gw) + gb * gb).sqrt();
            if norm < GRADIENT_TOLERANCE {
                break;
            }
            for (w, g) in weights.iter_mut().zip(&gw) {
                // undo the l2 part of the gradient; it is applied as a shrink
                *w = (*w - step * (g - l2 * *w)) * shrink;
            }
            bias -= step * gb;
        }
        Self {
            weights,
            bias,
            final_gradient_norm: norm,
        }
    }

    pub fn converged(&self) -> bool {
        self.final_gradient_norm < GRADIENT_TOLERANCE
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|r| sigmoid(dot(x.row(r), &self.weights) + self.bias))
            .collect()
    }
}
