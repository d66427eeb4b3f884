//! Reconstruction losses: mean square error for the dense autoencoder,
//! mean absolute error for the sequence model.

use serde::{Deserialize, Serialize};

/// Supported reconstruction losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
    Mae,
}

impl Loss {
    /// Loss value, averaged over all elements of the prediction.
    pub fn value(self, prediction: &[f64], target: &[f64]) -> f64 {
        debug_assert_eq!(prediction.len(), target.len());
        let n = prediction.len() as f64;
        match self {
            Loss::Mse => {
                prediction
                    .iter()
                    .zip(target)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
                    / n
            }
            Loss::Mae => {
                prediction
                    .iter()
                    .zip(target)
                    .map(|(p, t)| (p - t).abs())
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// Gradient of [`Loss::value`] with respect to the prediction. The MAE
    /// subgradient at zero difference is taken as 0.
    pub fn gradient(self, prediction: &[f64], target: &[f64]) -> Vec<f64> {
        debug_assert_eq!(prediction.len(), target.len());
        let n = prediction.len() as f64;
        match self {
            Loss::Mse => prediction
                .iter()
                .zip(target)
                .map(|(p, t)| 2.0 * (p - t) / n)
                .collect(),
            Loss::Mae => prediction
                .iter()
                .zip(target)
                .map(|(p, t)| {
                    if p > t {
                        1.0 / n
                    } else if p < t {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_value_and_gradient() {
        let p = [1.0, 3.0];
        let t = [0.0, 1.0];
        assert_eq!(Loss::Mse.value(&p, &t), (1.0 + 4.0) / 2.0);
        assert_eq!(Loss::Mse.gradient(&p, &t), vec![1.0, 2.0]);
    }

    #[test]
    fn mae_value_and_gradient() {
        let p = [1.0, -2.0, 5.0];
        let t = [0.0, 0.0, 5.0];
        assert!((Loss::Mae.value(&p, &t) - 1.0).abs() < 1e-15);
        assert_eq!(
            Loss::Mae.gradient(&p, &t),
            vec![1.0 / 3.0, -1.0 / 3.0, 0.0]
        );
    }

    #[test]
    fn perfect_reconstruction_is_zero_loss() {
        let x = [0.25, -1.5, 3.0];
        assert_eq!(Loss::Mse.value(&x, &x), 0.0);
        assert_eq!(Loss::Mae.value(&x, &x), 0.0);
    }
}
