//! Single-stage baseline detectors.
//!
//! Each case trains one reconstruction backbone on one derived input
//! representation and turns its scores into detections with a single
//! threshold, swept for best F1. They are the reference points the
//! two-stage pipeline is measured against:
//!
//! * **C1** — operation-cycle rows only, scored per row;
//! * **C2** — sensor rows only, at every 1 Hz timestamp;
//! * **C3** — dense concatenation at every 1 Hz timestamp, with the
//!   operation-cycle block zero-imputed wherever no cycle row exists;
//! * **C4** — concatenation `[x_op; x_sensor]` only at cycle timestamps,
//!   sampling the sensor row recorded at each cycle's time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{
    f1, has_neighbor, quantile_grid, range_precision_recall, EvalConfig, EvalReport, SurfaceRow,
};
use crate::linalg::Matrix;
use crate::neuralnet::{
    train_lstm, train_mlp, LstmConfig, LstmEncoderDecoder, MlpAutoencoder, MlpConfig,
    TrainConfig,
};
use crate::preprocess::{prepare, PreparedDataset, PreprocessConfig, SplitSpec};
use crate::scoring::{
    aggregate_window_scores, residual_norm, score_opcycle, window_starts, WindowConfig,
};
use crate::timeseries::{
    AlarmLabels, FeatureSeries, HeterogeneousDataset, OperationCycleSeries, ScoreSeries,
    SensorSeries, Timestamp,
};

/// Which reconstruction model a baseline trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    /// Dense autoencoder scoring one row at a time.
    MlpDae,
    /// Sequence autoencoder scoring sliding windows of consecutive rows.
    LstmDae,
}

/// The four single-stage input constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineCase {
    C1,
    C2,
    C3,
    C4,
}

impl BaselineCase {
    pub const ALL: [BaselineCase; 4] = [
        BaselineCase::C1,
        BaselineCase::C2,
        BaselineCase::C3,
        BaselineCase::C4,
    ];
}

impl std::fmt::Display for BaselineCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BaselineCase::C1 => "C1",
            BaselineCase::C2 => "C2",
            BaselineCase::C3 => "C3",
            BaselineCase::C4 => "C4",
        };
        f.write_str(name)
    }
}

/// Knobs for a baseline run. Model `input_dim`s may be zero and are filled
/// in from the constructed case input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Seed for backbone weight initialization.
    pub seed: u64,
    pub preprocess: PreprocessConfig,
    /// Window geometry for the sequence backbone.
    pub window: WindowConfig,
    pub mlp: MlpConfig,
    pub lstm: LstmConfig,
    pub mlp_train: TrainConfig,
    pub lstm_train: TrainConfig,
    pub eval: EvalConfig,
    /// Keep every k-th training row for dense-backbone cases whose input is
    /// at 1 Hz (C2, C3); scoring still covers every test row.
    pub dense_train_stride: usize,
    /// Upper bound on sequence-backbone training windows.
    pub max_train_windows: Option<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            seed: 0,
            preprocess: PreprocessConfig::default(),
            window: WindowConfig::default(),
            mlp: MlpConfig::default(),
            lstm: LstmConfig::default(),
            mlp_train: TrainConfig::dense_default(),
            lstm_train: TrainConfig::sequence_default(),
            eval: EvalConfig::default(),
            dense_train_stride: 1,
            max_train_windows: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.mlp_train.validate()?;
        self.lstm_train.validate()?;
        self.eval.validate()?;
        if self.dense_train_stride == 0 {
            return Err(Error::Config("dense_train_stride must be ≥ 1".into()));
        }
        if self.max_train_windows == Some(0) {
            return Err(Error::Config("max_train_windows must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Reinterpret a sensor series as timestamped rows (one per second).
fn sensor_as_rows(sensor: &SensorSeries) -> Result<OperationCycleSeries> {
    let start = sensor.start().0;
    let timestamps = (0..sensor.len() as u64).map(|i| Timestamp(start + i)).collect();
    OperationCycleSeries::new(
        timestamps,
        sensor.feature_names().to_vec(),
        sensor.values().clone(),
    )
}

/// Concatenated feature row layout shared by C3 and C4: operation-cycle
/// features first, sensor features after.
fn concat_names(op: &OperationCycleSeries, sensor: &SensorSeries) -> Vec<String> {
    op.feature_names()
        .iter()
        .chain(sensor.feature_names())
        .cloned()
        .collect()
}

/// C3 input: one row per sensor timestamp; the operation-cycle block holds
/// the cycle row recorded at that exact second, or zeros where none exists.
fn zero_imputed_concat(
    op: &OperationCycleSeries,
    sensor: &SensorSeries,
) -> Result<OperationCycleSeries> {
    let d_o = op.feature_count();
    let d_s = sensor.feature_count();
    let start = sensor.start().0;
    let op_times = op.timestamps();
    let mut values = Matrix::zeros(sensor.len(), d_o + d_s);
    for i in 0..sensor.len() {
        let t = Timestamp(start + i as u64);
        if let Ok(row) = op_times.binary_search(&t) {
            for (f, &v) in op.values().row(row).iter().enumerate() {
                values.set(i, f, v);
            }
        }
        for (f, &v) in sensor.values().row(i).iter().enumerate() {
            values.set(i, d_o + f, v);
        }
    }
    let timestamps = (0..sensor.len() as u64).map(|i| Timestamp(start + i)).collect();
    OperationCycleSeries::new(timestamps, concat_names(op, sensor), values)
}

/// C4 input: one row per cycle timestamp, concatenating the cycle row with
/// the sensor row sampled at the same second.
fn concat_at_cycles(
    op: &OperationCycleSeries,
    sensor: &SensorSeries,
) -> Result<OperationCycleSeries> {
    let d_o = op.feature_count();
    let d_s = sensor.feature_count();
    let mut values = Matrix::zeros(op.len(), d_o + d_s);
    for (i, &t) in op.timestamps().iter().enumerate() {
        let row = sensor.row_index(t).ok_or_else(|| {
            Error::Validation(format!("no sensor row at cycle timestamp {t}"))
        })?;
        for (f, &v) in op.values().row(i).iter().enumerate() {
            values.set(i, f, v);
        }
        for (f, &v) in sensor.values().row(row).iter().enumerate() {
            values.set(i, d_o + f, v);
        }
    }
    OperationCycleSeries::new(op.timestamps().to_vec(), concat_names(op, sensor), values)
}

/// Build the case's train and test row series from prepared data.
fn build_case(
    prepared: &PreparedDataset,
    case: BaselineCase,
) -> Result<(OperationCycleSeries, OperationCycleSeries)> {
    let (train, test) = (&prepared.train, &prepared.test);
    match case {
        BaselineCase::C1 => Ok((train.opcycle.clone(), test.opcycle.clone())),
        BaselineCase::C2 => Ok((sensor_as_rows(&train.sensor)?, sensor_as_rows(&test.sensor)?)),
        BaselineCase::C3 => Ok((
            zero_imputed_concat(&train.opcycle, &train.sensor)?,
            zero_imputed_concat(&test.opcycle, &test.sensor)?,
        )),
        BaselineCase::C4 => Ok((
            concat_at_cycles(&train.opcycle, &train.sensor)?,
            concat_at_cycles(&test.opcycle, &test.sensor)?,
        )),
    }
}

/// Keep every `stride`-th row of a matrix (always keeps row 0).
fn thin_rows(values: &Matrix, stride: usize) -> Matrix {
    if stride <= 1 {
        return values.clone();
    }
    let rows: Vec<Vec<f64>> = (0..values.rows())
        .step_by(stride)
        .map(|r| values.row(r).to_vec())
        .collect();
    Matrix::from_rows(&rows)
}

/// Score every row of `series` with a window-reconstructing sequence model:
/// per-row residual norms inside each window, aggregated across the windows
/// covering each row. Rows in no complete window get no score.
fn lstm_row_scores(
    model: &LstmEncoderDecoder,
    series: &OperationCycleSeries,
    window: &WindowConfig,
) -> Result<ScoreSeries> {
    let values = series.values();
    let starts = window_starts(series.len(), window)?;
    let per_window: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| -> Result<Vec<f64>> {
            let seq = values.row_range(s..s + window.len);
            let recon = model.reconstruct(&seq)?;
            Ok((0..window.len)
                .map(|k| residual_norm(seq.row(k), recon.row(k)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let per_row = aggregate_window_scores(&per_window, &starts, series.len(), window.aggregation);
    let entries = series
        .timestamps()
        .iter()
        .zip(per_row)
        .filter_map(|(&t, s)| s.map(|s| (t, s)))
        .collect();
    ScoreSeries::new(entries)
}

/// Exhaustive best-F1 search over one threshold. Detections are the score
/// entries strictly above the threshold; ties break toward the smaller
/// threshold. The returned report uses the two-threshold shape with the
/// second threshold fixed at 0.
pub fn single_threshold_sweep(
    scores: &ScoreSeries,
    alarms: &AlarmLabels,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let grid = match &cfg.tau1_grid {
        Some(g) => g.clone(),
        None => quantile_grid(scores, cfg.grid_points),
    };
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    let entries = scores.entries();
    let alarm_points = alarms.points();
    let near_alarm: Vec<bool> = entries
        .iter()
        .map(|(t, _)| has_neighbor(alarm_points, *t, cfg.delta_s))
        .collect();
    // An alarm is recalled at threshold τ iff the best score within δ of it
    // beats τ, so one max per alarm replaces a scan per grid point.
    let times: Vec<Timestamp> = entries.iter().map(|(t, _)| *t).collect();
    let alarm_best: Vec<f64> = alarm_points
        .iter()
        .map(|a| {
            let from = times.partition_point(|u| *u < a.minus_clamped(cfg.delta_s));
            let to = times.partition_point(|u| *u <= a.plus(cfg.delta_s));
            entries[from..to]
                .iter()
                .fold(f64::NEG_INFINITY, |m, &(_, s)| m.max(s))
        })
        .collect();

    let mut surface = Vec::with_capacity(grid.len());
    let mut best: Option<SurfaceRow> = None;
    for &tau in &grid {
        let detected = entries.iter().filter(|&&(_, s)| s > tau).count();
        let detected_near = entries
            .iter()
            .zip(&near_alarm)
            .filter(|(&(_, s), &near)| s > tau && near)
            .count();
        let precision = if detected == 0 {
            0.0
        } else {
            detected_near as f64 / detected as f64
        };
        let recall = if alarm_best.is_empty() {
            0.0
        } else {
            alarm_best.iter().filter(|&&m| m > tau).count() as f64 / alarm_best.len() as f64
        };
        let row = SurfaceRow {
            tau1: tau,
            tau2: 0.0,
            precision,
            recall,
            f1: f1(precision, recall),
        };
        surface.push(row);
        // Strictly-greater keeps the first (smallest) threshold on ties.
        if best.map_or(true, |b| row.f1 > b.f1) {
            best = Some(row);
        }
    }
    let best = best.expect("grid is non-empty");
    let detected: Vec<Timestamp> = entries
        .iter()
        .filter(|&&(_, s)| s > best.tau1)
        .map(|&(t, _)| t)
        .collect();
    Ok(EvalReport {
        tau1: best.tau1,
        tau2: 0.0,
        metrics: range_precision_recall(&detected, alarms, cfg.delta_s),
        surface,
    })
}

/// Train the chosen backbone on the case's input and sweep one threshold.
pub fn single_stage_eval(
    dataset: &HeterogeneousDataset,
    boundary: Timestamp,
    backbone: Backbone,
    case: BaselineCase,
    cfg: &BaselineConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let prepared = prepare(dataset, &SplitSpec { boundary }, &cfg.preprocess)?;
    let labels = prepared.test.labels.clone().ok_or_else(|| {
        Error::Validation("baseline evaluation requires alarm labels".into())
    })?;
    let (train_series, test_series) = build_case(&prepared, case)?;
    log::info!(
        "case {case}: {} train rows, {} test rows, {} features",
        train_series.len(),
        test_series.len(),
        train_series.feature_count()
    );

    let scores = match backbone {
        Backbone::MlpDae => {
            let stride = match case {
                BaselineCase::C2 | BaselineCase::C3 => cfg.dense_train_stride,
                _ => 1,
            };
            let rows = thin_rows(train_series.values(), stride);
            let mut mlp_cfg = cfg.mlp.clone();
            if mlp_cfg.input_dim == 0 {
                mlp_cfg.input_dim = train_series.feature_count();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut model = MlpAutoencoder::new(&mlp_cfg, &mut rng)?;
            train_mlp(&mut model, &rows, &cfg.mlp_train)?;
            score_opcycle(&model, &test_series)?
        }
        Backbone::LstmDae => {
            if matches!(case, BaselineCase::C1 | BaselineCase::C4) {
                log::warn!(
                    "case {case}: sequence backbone over irregularly spaced cycle rows; \
                     windows treat consecutive rows as equal steps"
                );
            }
            let mut lstm_cfg = cfg.lstm.clone();
            if lstm_cfg.input_dim == 0 {
                lstm_cfg.input_dim = train_series.feature_count();
            }
            let starts = window_starts(train_series.len(), &cfg.window)?;
            let picked: Vec<usize> = match cfg.max_train_windows {
                Some(cap) if starts.len() > cap => {
                    let stride = starts.len().div_ceil(cap);
                    starts.iter().copied().step_by(stride).collect()
                }
                _ => starts,
            };
            let windows: Vec<Matrix> = picked
                .into_iter()
                .map(|s| train_series.values().row_range(s..s + cfg.window.len))
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut model = LstmEncoderDecoder::new(&lstm_cfg, &mut rng)?;
            train_lstm(&mut model, &windows, &cfg.lstm_train)?;
            lstm_row_scores(&model, &test_series, &cfg.window)?
        }
    };
    single_threshold_sweep(&scores, &labels, &cfg.eval)
}
