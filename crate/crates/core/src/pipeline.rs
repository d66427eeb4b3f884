//! End-to-end orchestration: preprocess, train both reconstruction models,
//! score the held-out region, and pick thresholds.
//!
//! The command-line tool exposes the individual stages; the benchmark and
//! the labeled evaluation path call [`run`] to do the whole thing in one
//! deterministic shot.

use serde::{Deserialize, Serialize};

use crate::detector::{stage1_select, stage2_filter, DetectionResult, DetectorConfig};
use crate::error::{Error, Result};
use crate::evaluate::{best_f1_sweep, EvalConfig, EvalReport};
use crate::linalg::Matrix;
use crate::neuralnet::{
    train_lstm, train_mlp, LstmConfig, LstmEncoderDecoder, MlpAutoencoder, MlpConfig,
    TrainConfig,
};
use crate::preprocess::{prepare, PreparedDataset, PreprocessConfig, SplitSpec};
use crate::scoring::{score_opcycle, score_sensor, window_starts, WindowConfig};
use crate::timeseries::{FeatureSeries, HeterogeneousDataset, ScoreSeries, SensorSeries, Timestamp};

/// Everything a full run needs besides the data and the split point.
///
/// `input_dim` of the two model configs may be left at zero; it is filled in
/// from the prepared data (after static-column removal) at training time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for model weight initialization (training loops draw their own
    /// shuffle/dropout streams from the train configs' seeds).
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    pub window: WindowConfig,
    pub mlp: MlpConfig,
    pub lstm: LstmConfig,
    pub mlp_train: TrainConfig,
    pub lstm_train: TrainConfig,
    pub detector: DetectorConfig,
    pub eval: EvalConfig,
    /// Stride between training windows; defaults to the scoring stride.
    pub train_window_step: Option<usize>,
    /// Upper bound on training windows; extra windows are thinned evenly.
    pub max_train_windows: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            preprocess: PreprocessConfig::default(),
            window: WindowConfig::default(),
            mlp: MlpConfig::default(),
            lstm: LstmConfig::default(),
            mlp_train: TrainConfig::dense_default(),
            lstm_train: TrainConfig::sequence_default(),
            detector: DetectorConfig::default(),
            eval: EvalConfig::default(),
            train_window_step: None,
            max_train_windows: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.mlp_train.validate()?;
        self.lstm_train.validate()?;
        self.detector.validate()?;
        self.eval.validate()?;
        if self.train_window_step == Some(0) {
            return Err(Error::Config("train_window_step must be ≥ 1".into()));
        }
        if self.max_train_windows == Some(0) {
            return Err(Error::Config("max_train_windows must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Cut a sensor series into fixed-length training windows.
///
/// Windows start at multiples of `step` and a trailing partial window is
/// dropped, mirroring how scoring walks the series. If `cap` is given and
/// fewer starts than windows exist, every k-th window is kept so the subset
/// still spans the whole training region.
pub fn training_windows(
    sensor: &SensorSeries,
    len: usize,
    step: usize,
    cap: Option<usize>,
) -> Result<Vec<Matrix>> {
    let cfg = WindowConfig {
        len,
        step,
        ..WindowConfig::default()
    };
    cfg.validate()?;
    let starts = window_starts(sensor.len(), &cfg)?;
    let picked: Vec<usize> = match cap {
        Some(cap) if starts.len() > cap => {
            let stride = starts.len().div_ceil(cap);
            starts.iter().copied().step_by(stride).collect()
        }
        _ => starts,
    };
    let values = sensor.values();
    if values.has_nan() {
        return Err(Error::Validation(
            "sensor training data contains missing values; run imputation first".into(),
        ));
    }
    Ok(picked
        .into_iter()
        .map(|s| values.row_range(s..s + len))
        .collect())
}

/// The two trained reconstruction models plus their loss histories.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub op_model: MlpAutoencoder,
    pub sensor_model: LstmEncoderDecoder,
    pub op_history: Vec<f64>,
    pub sensor_history: Vec<f64>,
}

/// Train the dense autoencoder on training cycle rows and the sequence
/// autoencoder on training sensor windows. Model initialization draws from
/// `cfg.seed` (sequence model from `cfg.seed + 1`), so two runs with the
/// same config and data produce bit-identical models.
pub fn train_models(prepared: &PreparedDataset, cfg: &PipelineConfig) -> Result<TrainedModels> {
    cfg.validate()?;
    use rand::SeedableRng;
    let mut mlp_cfg = cfg.mlp.clone();
    if mlp_cfg.input_dim == 0 {
        mlp_cfg.input_dim = prepared.train.opcycle.feature_count();
    }
    let mut lstm_cfg = cfg.lstm.clone();
    if lstm_cfg.input_dim == 0 {
        lstm_cfg.input_dim = prepared.train.sensor.feature_count();
    }

    let mut mlp_rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut op_model = MlpAutoencoder::new(&mlp_cfg, &mut mlp_rng)?;
    let op_history = train_mlp(&mut op_model, prepared.train.opcycle.values(), &cfg.mlp_train)?;

    let step = cfg.train_window_step.unwrap_or(cfg.window.step);
    let windows = training_windows(
        &prepared.train.sensor,
        cfg.window.len,
        step,
        cfg.max_train_windows,
    )?;
    if windows.is_empty() {
        return Err(Error::Validation(
            "sensor training region is shorter than one window".into(),
        ));
    }
    let mut lstm_rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut sensor_model = LstmEncoderDecoder::new(&lstm_cfg, &mut lstm_rng)?;
    let sensor_history = train_lstm(&mut sensor_model, &windows, &cfg.lstm_train)?;

    Ok(TrainedModels {
        op_model,
        sensor_model,
        op_history,
        sensor_history,
    })
}

/// Everything a labeled end-to-end run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub op_scores: ScoreSeries,
    pub sensor_scores: ScoreSeries,
    /// Threshold sweep result on the held-out region.
    pub report: EvalReport,
    /// Detection at the swept-out best thresholds, with audit trail.
    pub detection: DetectionResult,
}

/// Preprocess, train, score the held-out region, sweep thresholds against
/// the labels, and run detection at the best thresholds found.
pub fn run(
    dataset: &HeterogeneousDataset,
    boundary: Timestamp,
    cfg: &PipelineConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    let prepared = prepare(dataset, &SplitSpec { boundary }, &cfg.preprocess)?;
    let labels = prepared.test.labels.clone().ok_or_else(|| {
        Error::Validation("labeled run requested but the dataset has no alarm labels".into())
    })?;
    let models = train_models(&prepared, cfg)?;

    let op_scores = score_opcycle(&models.op_model, &prepared.test.opcycle)?;
    let sensor_scores = score_sensor(&models.sensor_model, &prepared.test.sensor, &cfg.window)?;

    let report = best_f1_sweep(
        &op_scores,
        &sensor_scores,
        &labels,
        &cfg.eval,
        cfg.detector.eta_s,
    )?;
    // Drive the stages directly: the swept grid legitimately includes the
    // zero endpoint, which a hand-written detector config would reject.
    let detection = stage2_filter(
        &stage1_select(&op_scores, report.tau1),
        &sensor_scores,
        report.tau2,
        cfg.detector.eta_s,
    );
    Ok(RunOutput {
        op_scores,
        sensor_scores,
        report,
        detection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn tiny_pipeline() -> PipelineConfig {
        PipelineConfig {
            window: WindowConfig {
                len: 60,
                step: 30,
                ..WindowConfig::default()
            },
            mlp_train: TrainConfig {
                epochs: 2,
                ..TrainConfig::dense_default()
            },
            lstm: LstmConfig {
                hidden_size: 4,
                num_layers: 1,
                dropout: 0.0,
                ..LstmConfig::default()
            },
            lstm_train: TrainConfig {
                epochs: 1,
                ..TrainConfig::sequence_default()
            },
            max_train_windows: Some(8),
            ..PipelineConfig::default()
        }
    }

    fn tiny_synth(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            duration_s: 4_000,
            delta_s: 60,
            missing_rate_op: 0.0,
            missing_rate_sensor: 0.0,
            anomalies: crate::synth::AnomalySpec {
                type_a: 2,
                type_b: 2,
                sensor_distractors: 2,
                ..Default::default()
            },
            downtime: crate::synth::DowntimeSpec {
                planned: vec![],
                unplanned_per_day: 0.0,
                unplanned_len_s: (60, 60),
            },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn training_windows_respect_cap_and_span() {
        let (data, _) = generate(&tiny_synth(0)).unwrap();
        let all = training_windows(&data.sensor, 60, 30, None).unwrap();
        assert_eq!(all.len(), (4_000 - 60) / 30 + 1);
        let capped = training_windows(&data.sensor, 60, 30, Some(10)).unwrap();
        assert!(capped.len() <= 10);
        assert!(!capped.is_empty());
        for w in &capped {
            assert_eq!((w.rows(), w.cols()), (60, 8));
        }
    }

    #[test]
    fn full_run_is_deterministic_and_complete() {
        let (data, manifest) = generate(&tiny_synth(1)).unwrap();
        let cfg = tiny_pipeline();
        let boundary = Timestamp(manifest.boundary_s);
        let a = run(&data, boundary, &cfg).unwrap();
        let b = run(&data, boundary, &cfg).unwrap();
        assert_eq!(a.report.tau1.to_bits(), b.report.tau1.to_bits());
        assert_eq!(a.report.tau2.to_bits(), b.report.tau2.to_bits());
        assert_eq!(
            a.report.metrics.f1.to_bits(),
            b.report.metrics.f1.to_bits()
        );
        assert_eq!(a.detection.detected, b.detection.detected);
        assert!(!a.op_scores.is_empty());
        assert!(!a.sensor_scores.is_empty());
        // Scores only cover the held-out region.
        for (t, _) in a.op_scores.entries() {
            assert!(*t >= boundary);
        }
    }

    #[test]
    fn run_without_labels_is_an_error() {
        let (data, manifest) = generate(&tiny_synth(2)).unwrap();
        let unlabeled =
            HeterogeneousDataset::new(data.opcycle.clone(), data.sensor.clone(), None).unwrap();
        let err = run(&unlabeled, Timestamp(manifest.boundary_s), &tiny_pipeline());
        assert!(err.is_err());
    }
}
