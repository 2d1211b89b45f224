//! L2-regularized logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::matrix::Matrix;
use crate::preprocess::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    /// Stop once the gradient's infinity norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            l2_lambda: 1e-4,
            max_epochs: 2000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs_run: usize,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticModel {
    pub fn linear_term(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_term(x))
    }
}

/// Mean log-loss plus `λ/2·‖w‖²` (bias unpenalized) and its gradient with
/// respect to the weights and the bias.
pub fn loss_and_gradient(
    x: &Matrix,
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (row, &label) in x.rows().zip(y) {
        let z = weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias;
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let residual = sigmoid(z) - t;
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>();
    loss = loss / n + 0.5 * l2_lambda * reg;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2_lambda * w;
    }
    (loss, grad_w, grad_b / n)
}

pub fn train_logistic(data: &DesignMatrix, hp: &LogisticParams) -> Result<LogisticModel> {
    train_logistic_traced(data, hp).map(|(m, _)| m)
}

/// Like [`train_logistic`] but also returns the loss before every update.
pub fn train_logistic_traced(
    data: &DesignMatrix,
    hp: &LogisticParams,
) -> Result<(LogisticModel, Vec<f64>)> {
    if data.labels.iter().any(|&l| l > 1) {
        return Err(CrlError::NonBinaryLabels);
    }
    if data.n_rows() == 0 {
        return Err(CrlError::EmptyDataset);
    }
    let d = data.n_features();
    let mut weights = vec![0.0; d];
    let mut bias = 0.0;
    let mut history = Vec::with_capacity(hp.max_epochs);
    let mut epochs_run = 0;
    for epoch in 0..hp.max_epochs {
        let (loss, gw, gb) =
            loss_and_gradient(&data.features, &data.labels, &weights, bias, hp.l2_lambda);
        if !loss.is_finite() {
            return Err(CrlError::DivergenceDetected(epoch));
        }
        history.push(loss);
        let gnorm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gnorm < hp.tolerance {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= hp.learning_rate * g;
        }
        bias -= hp.learning_rate * gb;
        epochs_run = epoch + 1;
    }
    if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(CrlError::DivergenceDetected(epochs_run));
    }
    Ok((
        LogisticModel {
            weights,
            bias,
            epochs_run,
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(rows: &[Vec<f64>], labels: Vec<u8>) -> DesignMatrix {
        let m = Matrix::from_rows(rows).unwrap();
        let names = (0..m.n_cols()).map(|j| format!("x{j}")).collect();
        DesignMatrix::new(m, labels, names).unwrap()
    }

    #[test]
    fn sigmoid_midpoint_and_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) >= 0.0);
        assert!((softplus(-800.0)).abs() < 1e-300 + 1e-12);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn separable_points_are_fitted() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..10 {
            rows.push(vec![0.0]);
            labels.push(0);
            rows.push(vec![1.0]);
            labels.push(1);
        }
        let data = design(&rows, labels);
        let hp = LogisticParams {
            l2_lambda: 1e-4,
            ..Default::default()
        };
        let m = train_logistic(&data, &hp).unwrap();
        assert!(m.probability(&[0.0]) < 0.5);
        assert!(m.probability(&[1.0]) >= 0.5);
    }

    #[test]
    fn all_negative_labels_push_probability_down() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0, 0.5]).collect();
        let data = design(&rows, vec![0; 20]);
        let m = train_logistic(&data, &LogisticParams::default()).unwrap();
        for r in &rows {
            assert!(m.probability(r) < 0.5);
        }
    }

    #[test]
    fn non_binary_labels_rejected() {
        let mut data = design(&[vec![0.0], vec![1.0]], vec![0, 1]);
        data.labels[1] = 2;
        assert!(matches!(
            train_logistic(&data, &LogisticParams::default()),
            Err(CrlError::NonBinaryLabels)
        ));
    }

    #[test]
    fn divergence_is_detected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1e150 * i as f64]).collect();
        let labels = (0..10).map(|i| (i % 2) as u8).collect();
        let data = design(&rows, labels);
        let hp = LogisticParams {
            learning_rate: 1e10,
            ..Default::default()
        };
        assert!(matches!(
            train_logistic(&data, &hp),
            Err(CrlError::DivergenceDetected(_))
        ));
    }

    #[test]
    fn loss_is_monotone_for_small_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] + 0.3 * rng.gen::<f64>() > 0.9))
            .collect();
        let data = design(&rows, labels);
        let hp = LogisticParams {
            learning_rate: 0.01,
            max_epochs: 300,
            ..Default::default()
        };
        let (_, hist) = train_logistic_traced(&data, &hp).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(3..15);
            let d = rng.gen_range(1..5);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let (_, gw, gb) = loss_and_gradient(&x, &y, &w, b, 0.01);
            let h = 1e-5;
            for j in 0..d {
                let mut wp = w.clone();
                wp[j] += h;
                let mut wm = w.clone();
                wm[j] -= h;
                let fd = (loss_and_gradient(&x, &y, &wp, b, 0.01).0
                    - loss_and_gradient(&x, &y, &wm, b, 0.01).0)
                    / (2.0 * h);
                assert!((fd - gw[j]).abs() <= 1e-4 * gw[j].abs().max(1e-3));
            }
            let fd = (loss_and_gradient(&x, &y, &w, b + h, 0.01).0
                - loss_and_gradient(&x, &y, &w, b - h, 0.01).0)
                / (2.0 * h);
            assert!((fd - gb).abs() <= 1e-4 * gb.abs().max(1e-3));
        }
    }
}
