//! Anomaly scores from reconstruction residuals.
//!
//! Both signal families are scored the same way — the Euclidean norm of the
//! model's reconstruction residual — but on different time bases:
//!
//! * operation-cycle rows are reconstructed independently by the dense
//!   autoencoder, one score per event timestamp;
//! * the sensor stream is cut into overlapping fixed-length windows, each
//!   window is reconstructed by the sequence autoencoder, and every
//!   timestamp's score aggregates the residual norms of all windows that
//!   contain it (max by default, the most sensitive choice).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::neuralnet::{LstmEncoderDecoder, MlpAutoencoder};
use crate::timeseries::{FeatureSeries, OperationCycleSeries, ScoreSeries, SensorSeries};

/// How a timestamp combines the residual norms of the windows covering it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Max,
    Min,
    Mean,
}

impl Default for Aggregation {
    fn default() -> Self {
        Aggregation::Max
    }
}

/// Sliding-window layout for sensor scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Window length in timestamps (seconds at 1 Hz).
    pub len: usize,
    /// Offset between consecutive window starts; must be < `len` so
    /// windows overlap.
    pub step: usize,
    /// Per-timestamp combination of the covering windows' residual norms.
    pub aggregation: Aggregation,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            len: 180,
            step: 60,
            aggregation: Aggregation::Max,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.step >= self.len {
            return Err(Error::Config(format!(
                "window step must satisfy 0 < step < len (got step {} for len {})",
                self.step, self.len
            )));
        }
        Ok(())
    }
}

/// Start offsets of all full windows over a series of `series_len` rows:
/// the arithmetic progression 0, step, 2·step, … while a whole window still
/// fits, i.e. ⌊(L−len)/step⌋+1 windows. A trailing remainder shorter than
/// `len` is dropped. Errors if not even one window fits.
pub fn window_starts(series_len: usize, cfg: &WindowConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    if series_len < cfg.len {
        return Err(Error::Validation(format!(
            "series has {series_len} rows but windows need at least {}",
            cfg.len
        )));
    }
    Ok((0..=(series_len - cfg.len) / cfg.step)
        .map(|j| j * cfg.step)
        .collect())
}

/// Score every operation-cycle row with the dense autoencoder: the score at
/// timestamp t is ‖x_t − x̂_t‖₂.
pub fn score_opcycle(model: &MlpAutoencoder, op: &OperationCycleSeries) -> Result<ScoreSeries> {
    if model.input_dim() != op.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: op.feature_count(),
            context: "autoencoder input vs operation-cycle features".into(),
        });
    }
    if op.values().has_nan() {
        return Err(Error::Validation(
            "operation-cycle series contains missing values; impute before scoring".into(),
        ));
    }
    let scores = (0..op.len())
        .into_par_iter()
        .map(|i| {
            let row = op.values().row(i);
            let xhat = model.reconstruct(row)?;
            Ok(residual_norm(row, &xhat))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreSeries::new(
        op.timestamps()
            .iter()
            .copied()
            .zip(scores)
            .collect::<Vec<_>>(),
    )
}

/// Score the sensor stream with the sequence autoencoder. Every full window
/// is reconstructed independently; the score at timestamp t aggregates the
/// per-window residual norms ‖x_t − x̂_{t;j}‖₂ over all windows j containing
/// t. Timestamps covered by no full window (a tail shorter than one window
/// step) carry no score at all.
pub fn score_sensor(
    model: &LstmEncoderDecoder,
    sensor: &SensorSeries,
    cfg: &WindowConfig,
) -> Result<ScoreSeries> {
    if model.input_dim() != sensor.feature_count() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: sensor.feature_count(),
            context: "sequence autoencoder input vs sensor features".into(),
        });
    }
    if sensor.values().has_nan() {
        return Err(Error::Validation(
            "sensor series contains missing values; impute before scoring".into(),
        ));
    }
    let starts = window_starts(sensor.len(), cfg)?;

    // Each window is an independent reconstruction on a frozen model, so the
    // map is embarrassingly parallel; only the residual norms (w floats per
    // window) are kept.
    let per_window: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&start| {
            let seq = sensor.values().row_range(start..start + cfg.len);
            let xhat = model.reconstruct(&seq)?;
            Ok((0..cfg.len)
                .map(|k| residual_norm(seq.row(k), xhat.row(k)))
                .collect())
        })
        .collect::<Result<_>>()?;

    let scores = aggregate_window_scores(&per_window, &starts, sensor.len(), cfg.aggregation);
    ScoreSeries::new(
        scores
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (sensor.start().plus(i as u64), s)))
            .collect::<Vec<_>>(),
    )
}

/// Combine per-window residual norms into one optional score per timestamp
/// (`None` where no window covers the row). Windows are folded in index
/// order, so the result does not depend on how the reconstructions were
/// scheduled.
pub fn aggregate_window_scores(
    per_window: &[Vec<f64>],
    starts: &[usize],
    series_len: usize,
    aggregation: Aggregation,
) -> Vec<Option<f64>> {
    let mut acc: Vec<Option<(f64, usize)>> = vec![None; series_len];
    for (norms, &start) in per_window.iter().zip(starts) {
        for (k, &n) in norms.iter().enumerate() {
            let slot = &mut acc[start + k];
            *slot = Some(match *slot {
                None => (n, 1),
                Some((v, c)) => match aggregation {
                    Aggregation::Max => (v.max(n), c + 1),
                    Aggregation::Min => (v.min(n), c + 1),
                    Aggregation::Mean => (v + n, c + 1),
                },
            });
        }
    }
    acc.into_iter()
        .map(|slot| {
            slot.map(|(v, c)| match aggregation {
                Aggregation::Mean => v / c as f64,
                _ => v,
            })
        })
        .collect()
}

pub(crate) fn residual_norm(x: &[f64], xhat: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(xhat).map(|(a, b)| a - b).collect();
    l2_norm(&diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::neuralnet::dense::{Activation, DenseLayer};
    use crate::neuralnet::{LstmConfig, MlpConfig};
    use crate::timeseries::Timestamp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ts(points: &[(u64, &[f64])]) -> OperationCycleSeries {
        let rows: Vec<Vec<f64>> = points.iter().map(|(_, r)| r.to_vec()).collect();
        OperationCycleSeries::new(
            points.iter().map(|(t, _)| Timestamp(*t)).collect(),
            (0..rows[0].len()).map(|i| format!("f{i}")).collect(),
            Matrix::from_rows(&rows),
        )
        .unwrap()
    }

    fn identity_mlp(dim: usize) -> MlpAutoencoder {
        let mut weights = Matrix::zeros(dim, dim);
        for i in 0..dim {
            weights.set(i, i, 1.0);
        }
        MlpAutoencoder::from_layers(
            vec![DenseLayer {
                weights,
                bias: vec![0.0; dim],
                activation: Activation::Identity,
            }],
            vec![],
            0.0,
        )
        .unwrap()
    }

    fn zero_mlp(dim: usize) -> MlpAutoencoder {
        MlpAutoencoder::from_layers(
            vec![DenseLayer {
                weights: Matrix::zeros(dim, dim),
                bias: vec![0.0; dim],
                activation: Activation::Identity,
            }],
            vec![],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn window_starts_match_the_count_formula() {
        let cfg = WindowConfig::default();
        assert_eq!(window_starts(180, &cfg).unwrap(), vec![0]);
        assert_eq!(window_starts(300, &cfg).unwrap(), vec![0, 60, 120]);
        assert!(window_starts(179, &cfg).is_err());
        for len in [180usize, 181, 239, 240, 299, 1000, 86_400] {
            let starts = window_starts(len, &cfg).unwrap();
            assert_eq!(starts.len(), (len - cfg.len) / cfg.step + 1, "len {len}");
        }
    }

    #[test]
    fn overlapping_membership_counts() {
        // A 300-row series with w=180, γ=60 has windows at 0, 60, 120; every
        // row in [120, 180) lies in all three.
        let cfg = WindowConfig::default();
        let starts = window_starts(300, &cfg).unwrap();
        for t in 0..300 {
            let members = starts
                .iter()
                .filter(|&&s| t >= s && t < s + cfg.len)
                .count();
            if (120..180).contains(&t) {
                assert_eq!(members, 3, "t={t}");
            }
            assert!(members >= 1, "t={t} uncovered");
        }
    }

    #[test]
    fn perfect_reconstruction_scores_zero() {
        let op = ts(&[(5, &[0.3, -0.7]), (9, &[1.0, 2.0])]);
        let scores = score_opcycle(&identity_mlp(2), &op).unwrap();
        assert!(scores.values().all(|s| s == 0.0));
    }

    #[test]
    fn unit_residual_scores_one() {
        let op = ts(&[(5, &[1.0, 0.0])]);
        let scores = score_opcycle(&zero_mlp(2), &op).unwrap();
        assert_eq!(scores.entries(), &[(Timestamp(5), 1.0)]);
    }

    #[test]
    fn opcycle_scores_match_per_row_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let config = MlpConfig {
            input_dim: 3,
            hidden: vec![4, 2],
            ..MlpConfig::default()
        };
        let model = MlpAutoencoder::new(&config, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let op = OperationCycleSeries::new(
            (0..50).map(|i| Timestamp(3 * i as u64)).collect(),
            vec!["a".into(), "b".into(), "c".into()],
            Matrix::from_rows(&rows),
        )
        .unwrap();
        let scores = score_opcycle(&model, &op).unwrap();
        for (i, (t, s)) in scores.entries().iter().enumerate() {
            let xhat = model.reconstruct(&rows[i]).unwrap();
            let expected = rows[i]
                .iter()
                .zip(&xhat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert_eq!(*s, expected);
            assert_eq!(t.0, 3 * i as u64);
        }
    }

    #[test]
    fn aggregation_combines_overlapping_windows() {
        // Two windows of length 3 with step 2 over 5 rows; row 2 is covered
        // by both.
        let per_window = vec![vec![0.2, 0.2, 0.2], vec![0.7, 0.7, 0.7]];
        let starts = vec![0, 2];
        let max = aggregate_window_scores(&per_window, &starts, 5, Aggregation::Max);
        let min = aggregate_window_scores(&per_window, &starts, 5, Aggregation::Min);
        let mean = aggregate_window_scores(&per_window, &starts, 5, Aggregation::Mean);
        assert_eq!(max[2], Some(0.7));
        assert_eq!(min[2], Some(0.2));
        assert_eq!(mean[2], Some((0.2 + 0.7) / 2.0));
        // Singleton coverage is the identity for every aggregation.
        for agg in [max, min, mean] {
            assert_eq!(agg[0], Some(0.2));
            assert_eq!(agg[4], Some(0.7));
        }
    }

    fn random_sensor(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> SensorSeries {
        let mut values = Matrix::zeros(len, dim);
        for v in values.as_mut_slice().iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        SensorSeries::new(
            Timestamp(100),
            (0..dim).map(|i| format!("s{i}")).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn sensor_scores_match_full_recomputation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let config = LstmConfig {
            input_dim: 2,
            hidden_size: 4,
            num_layers: 1,
            dropout: 0.0,
            reverse_reconstruction: true,
        };
        let model = LstmEncoderDecoder::new(&config, &mut rng).unwrap();
        let cfg = WindowConfig {
            len: 8,
            step: 3,
            aggregation: Aggregation::Max,
        };
        let sensor = random_sensor(&mut rng, 29, 2);
        let scores = score_sensor(&model, &sensor, &cfg).unwrap();

        // Oracle: for every timestamp, rescan all windows independently.
        let starts = window_starts(29, &cfg).unwrap();
        let last_covered = starts.last().unwrap() + cfg.len - 1;
        assert_eq!(scores.len(), last_covered + 1);
        for (t, s) in scores.entries() {
            let row = (t.0 - 100) as usize;
            let mut expected = f64::NEG_INFINITY;
            for &start in &starts {
                if row < start || row >= start + cfg.len {
                    continue;
                }
                let seq = sensor.values().row_range(start..start + cfg.len);
                let xhat = model.reconstruct(&seq).unwrap();
                let k = row - start;
                let norm = seq
                    .row(k)
                    .iter()
                    .zip(xhat.row(k))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                expected = expected.max(norm);
            }
            assert_eq!(*s, expected, "row {row}");
        }
    }

    #[test]
    fn uncovered_tail_carries_no_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let config = LstmConfig {
            input_dim: 1,
            hidden_size: 2,
            num_layers: 1,
            dropout: 0.0,
            reverse_reconstruction: true,
        };
        let model = LstmEncoderDecoder::new(&config, &mut rng).unwrap();
        let cfg = WindowConfig {
            len: 6,
            step: 4,
            aggregation: Aggregation::Max,
        };
        // 13 rows: windows at 0 and 4 cover rows 0..10; rows 10..13 fall only
        // in the dropped partial window and get no score.
        let sensor = random_sensor(&mut rng, 13, 1);
        let scores = score_sensor(&model, &sensor, &cfg).unwrap();
        assert_eq!(scores.len(), 10);
        assert_eq!(scores.entries().last().unwrap().0, Timestamp(109));
    }

    #[test]
    fn missing_values_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let config = LstmConfig {
            input_dim: 1,
            hidden_size: 2,
            num_layers: 1,
            dropout: 0.0,
            reverse_reconstruction: true,
        };
        let model = LstmEncoderDecoder::new(&config, &mut rng).unwrap();
        let mut values = Matrix::zeros(10, 1);
        values.set(3, 0, f64::NAN);
        let sensor = SensorSeries::new(Timestamp(0), vec!["s0".into()], values).unwrap();
        let cfg = WindowConfig {
            len: 4,
            step: 2,
            aggregation: Aggregation::Max,
        };
        assert!(score_sensor(&model, &sensor, &cfg).is_err());
    }

    #[test]
    fn window_config_validation() {
        assert!(WindowConfig::default().validate().is_ok());
        let bad = WindowConfig {
            len: 60,
            step: 60,
            aggregation: Aggregation::Max,
        };
        assert!(bad.validate().is_err());
        let zero = WindowConfig {
            len: 60,
            step: 0,
            aggregation: Aggregation::Max,
        };
        assert!(zero.validate().is_err());
    }
}
