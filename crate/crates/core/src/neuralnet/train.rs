//! Mini-batch training loops for the two reconstruction models.
//!
//! Both loops are bit-reproducible for a fixed seed: shuffling uses a seeded
//! generator, per-window dropout draws are derived deterministically from
//! (seed, epoch, sample index), and batch gradients are reduced in sample
//! order regardless of how many threads computed them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neuralnet::adam::AdamState;
use crate::neuralnet::dense::{MlpAutoencoder, MlpGrads};
use crate::neuralnet::loss::Loss;
use crate::neuralnet::lstm::{LstmEncoderDecoder, LstmGrads};
use crate::neuralnet::{flatten_lstm_grads, flatten_mlp_grads, Parameterized};

/// Shared training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: Loss,
    pub shuffle: bool,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 100,
            seed: 0,
            loss: Loss::Mse,
            shuffle: true,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    /// Defaults for the dense autoencoder: MSE, 100 epochs.
    pub fn dense_default() -> Self {
        TrainConfig::default()
    }

    /// Defaults for the sequence autoencoder: MAE, 50 epochs.
    pub fn sequence_default() -> Self {
        TrainConfig {
            epochs: 50,
            loss: Loss::Mae,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive and finite".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-sample dropout seed.
fn dropout_seed(seed: u64, epoch: usize, sample: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((epoch as u64) << 32) | sample as u64))
}

/// Summed (not averaged) loss and gradients over a batch of rows. Gradients
/// of a duplicated batch are exactly twice those of the single sample.
pub fn mlp_batch_gradients(
    model: &MlpAutoencoder,
    rows: &Matrix,
    indices: &[usize],
    loss: Loss,
) -> Result<(f64, MlpGrads)> {
    let mut total = MlpGrads::zeros_like(model);
    let mut loss_sum = 0.0;
    for &idx in indices {
        let x = rows.row(idx);
        let (xhat, cache) = model.forward(x)?;
        loss_sum += loss.value(&xhat, x) + model.l1_penalty();
        let grad = loss.gradient(&xhat, x);
        total.add_assign(&model.backward(&cache, &grad)?);
    }
    Ok((loss_sum, total))
}

/// Summed loss and gradients over a batch of windows. Each entry pairs a
/// window index with the dropout seed for its forward pass; windows are
/// processed in parallel and reduced in batch order.
pub fn lstm_batch_gradients(
    model: &LstmEncoderDecoder,
    windows: &[Matrix],
    batch: &[(usize, u64)],
    loss: Loss,
    train_mode: bool,
) -> Result<(f64, LstmGrads)> {
    let per_sample: Vec<Result<(f64, LstmGrads)>> = batch
        .par_iter()
        .map(|&(idx, seed)| {
            let window = &windows[idx];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (out, cache) = if train_mode {
                model.forward(window, Some(&mut rng))?
            } else {
                model.forward(window, None)?
            };
            let value = loss.value(out.as_slice(), window.as_slice());
            let grad_flat = loss.gradient(out.as_slice(), window.as_slice());
            let grad = Matrix::from_vec(window.rows(), window.cols(), grad_flat);
            let grads = model.backward(&cache, &grad)?;
            Ok((value, grads))
        })
        .collect();

    let mut total = LstmGrads::zeros_like(model);
    let mut loss_sum = 0.0;
    for item in per_sample {
        let (value, grads) = item?;
        loss_sum += value;
        total.add_assign(&grads);
    }
    Ok((loss_sum, total))
}

/// Train the dense autoencoder on one row per sample. Returns the per-epoch
/// mean objective (reconstruction loss plus the L1 penalty).
pub fn train_mlp(
    model: &mut MlpAutoencoder,
    rows: &Matrix,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if rows.rows() == 0 {
        return Err(Error::Validation("empty training set".into()));
    }
    if rows.cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: rows.cols(),
            context: "training rows vs autoencoder input".into(),
        });
    }
    if rows.has_nan() {
        return Err(Error::Validation(
            "training data contains missing values; run imputation first".into(),
        ));
    }

    let blocks = model.param_blocks();
    let mut params = model.params_flat();
    let mut adam = AdamState::with_learning_rate(params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let n = rows.rows();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (loss_sum, mut grads) = mlp_batch_gradients(model, rows, chunk, config.loss)?;
            epoch_loss += loss_sum;
            grads.scale(1.0 / chunk.len() as f64);
            adam.step(&mut params, &flatten_mlp_grads(&grads), &blocks)?;
            model.set_params(&params)?;
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("loss became {mean}"),
            });
        }
        history.push(mean);
    }
    log::info!(
        "dense autoencoder: {} epochs, loss {:.6} -> {:.6}",
        config.epochs,
        history.first().copied().unwrap_or(f64::NAN),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(history)
}

/// Train the sequence autoencoder on fixed-length windows. Returns the
/// per-epoch mean loss.
pub fn train_lstm(
    model: &mut LstmEncoderDecoder,
    windows: &[Matrix],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::Validation("empty training set".into()));
    }
    for (k, w) in windows.iter().enumerate() {
        if w.cols() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                actual: w.cols(),
                context: format!("window {k} feature dimension"),
            });
        }
        if w.has_nan() {
            return Err(Error::Validation(format!(
                "window {k} contains missing values; run imputation first"
            )));
        }
    }

    let blocks = model.param_blocks();
    let mut params = model.params_flat();
    let mut adam = AdamState::with_learning_rate(params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let n = windows.len();

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(usize, u64)> = chunk
                .iter()
                .map(|&idx| (idx, dropout_seed(config.seed, epoch, idx)))
                .collect();
            let (loss_sum, mut grads) =
                lstm_batch_gradients(model, windows, &batch, config.loss, true)?;
            epoch_loss += loss_sum;
            grads.scale(1.0 / chunk.len() as f64);
            adam.step(&mut params, &flatten_lstm_grads(&grads), &blocks)?;
            model.set_params(&params)?;
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("loss became {mean}"),
            });
        }
        history.push(mean);
    }
    log::info!(
        "sequence autoencoder: {} epochs, loss {:.6} -> {:.6}",
        config.epochs,
        history.first().copied().unwrap_or(f64::NAN),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::dense::MlpConfig;
    use crate::neuralnet::lstm::LstmConfig;

    #[test]
    fn zero_epochs_is_a_config_error() {
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(config.validate().is_err());
        let config = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn constant_rows_are_learned_to_small_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp_config = MlpConfig {
            input_dim: 3,
            hidden: vec![4],
            l1_coeff: 0.0,
            ..MlpConfig::default()
        };
        let mut model = MlpAutoencoder::new(&mlp_config, &mut rng).unwrap();
        let rows = Matrix::from_rows(&vec![vec![0.2, 0.5, 0.8]; 64]);
        let config = TrainConfig {
            epochs: 200,
            batch_size: 32,
            seed: 7,
            ..TrainConfig::default()
        };
        let history = train_mlp(&mut model, &rows, &config).unwrap();
        assert_eq!(history.len(), 200);
        assert!(
            history.last().unwrap() < &1e-4,
            "final loss {}",
            history.last().unwrap()
        );
    }

    #[test]
    fn same_seed_reproduces_parameters_bit_for_bit() {
        let data_rng = &mut ChaCha8Rng::seed_from_u64(10);
        let rows = Matrix::from_rows(
            &(0..40)
                .map(|_| (0..4).map(|_| rand::Rng::gen_range(data_rng, 0.0..1.0)).collect())
                .collect::<Vec<Vec<f64>>>(),
        );
        let mlp_config = MlpConfig {
            input_dim: 4,
            hidden: vec![3],
            ..MlpConfig::default()
        };
        let config = TrainConfig {
            epochs: 5,
            seed: 42,
            ..TrainConfig::default()
        };

        let mut init_rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = MlpAutoencoder::new(&mlp_config, &mut init_rng).unwrap();
        let mut b = a.clone();
        let ha = train_mlp(&mut a, &rows, &config).unwrap();
        let hb = train_mlp(&mut b, &rows, &config).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        assert_eq!(ha, hb);
    }

    fn tiny_lstm(seed: u64, dropout: f64) -> LstmEncoderDecoder {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LstmEncoderDecoder::new(
            &LstmConfig {
                input_dim: 2,
                hidden_size: 4,
                num_layers: 2,
                dropout,
                reverse_reconstruction: true,
            },
            &mut rng,
        )
        .unwrap()
    }

    fn tiny_windows() -> Vec<Matrix> {
        (0..6)
            .map(|k| {
                Matrix::from_rows(
                    &(0..5)
                        .map(|t| {
                            let phase = (k * 5 + t) as f64 * 0.37;
                            vec![phase.sin() * 0.5, phase.cos() * 0.5]
                        })
                        .collect::<Vec<_>>(),
                )
            })
            .collect()
    }

    #[test]
    fn duplicated_window_batch_doubles_the_gradient() {
        let model = tiny_lstm(3, 0.0);
        let windows = tiny_windows();
        let (l1, g1) = lstm_batch_gradients(&model, &windows, &[(0, 0)], Loss::Mae, false).unwrap();
        let (l2, g2) =
            lstm_batch_gradients(&model, &windows, &[(0, 0), (0, 0)], Loss::Mae, false).unwrap();
        assert_eq!(l2, 2.0 * l1);
        let f1 = flatten_lstm_grads(&g1);
        let f2 = flatten_lstm_grads(&g2);
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(*b, 2.0 * a);
        }
    }

    #[test]
    fn batch_reduction_is_order_insensitive_within_tolerance() {
        let model = tiny_lstm(5, 0.0);
        let windows = tiny_windows();
        let batch: Vec<(usize, u64)> = (0..windows.len()).map(|i| (i, 0)).collect();
        let reversed: Vec<(usize, u64)> = batch.iter().rev().copied().collect();
        let (_, fwd) = lstm_batch_gradients(&model, &windows, &batch, Loss::Mae, false).unwrap();
        let (_, rev) = lstm_batch_gradients(&model, &windows, &reversed, Loss::Mae, false).unwrap();
        for (a, b) in flatten_lstm_grads(&fwd).iter().zip(flatten_lstm_grads(&rev)) {
            let scale = a.abs().max(b.abs()).max(1e-12);
            assert!(((a - b) / scale).abs() < 1e-9);
        }
    }

    #[test]
    fn lstm_training_is_deterministic_and_loss_improves() {
        let windows = tiny_windows();
        let config = TrainConfig {
            epochs: 30,
            batch_size: 3,
            seed: 11,
            loss: Loss::Mae,
            ..TrainConfig::default()
        };
        let mut a = tiny_lstm(8, 0.2);
        let mut b = a.clone();
        let ha = train_lstm(&mut a, &windows, &config).unwrap();
        let hb = train_lstm(&mut b, &windows, &config).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        assert_eq!(ha, hb);
        assert!(
            ha.last().unwrap() < ha.first().unwrap(),
            "loss did not improve: {ha:?}"
        );
    }

    #[test]
    fn empty_training_sets_are_rejected() {
        let mut model = tiny_lstm(1, 0.0);
        let err = train_lstm(&mut model, &[], &TrainConfig::sequence_default()).unwrap_err();
        assert!(err.to_string().contains("empty training set"));
    }
}
