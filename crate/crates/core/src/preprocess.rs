//! Preprocessing: forward-fill imputation, static-feature removal, min-max
//! normalization and the chronological train/test split.
//!
//! The canonical order is impute → drop static features → split → fit
//! normalization on the training side and apply it (unclamped) to both
//! sides; [`prepare`] wires the steps together. Static-feature detection and
//! min-max fitting only ever look at training rows so nothing leaks from the
//! test period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{FeatureSeries, HeterogeneousDataset, Timestamp};

/// Per-feature normalization bounds fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    pub features: Vec<FeatureRange>,
}

/// Observed range of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl MinMaxParams {
    fn lookup(&self, name: &str) -> Option<&FeatureRange> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// Where the chronological split falls: rows with `t < boundary` are
/// training data, the rest is test data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub boundary: Timestamp,
}

/// Replace every missing cell with the most recent observed value of the
/// same feature. Fails if a feature is missing at the first row, because
/// there is nothing to carry forward.
pub fn forward_fill<S: FeatureSeries>(series: &S) -> Result<S> {
    let names = series.feature_names().to_vec();
    let mut values = series.values().clone();
    let (rows, cols) = (values.rows(), values.cols());
    for c in 0..cols {
        if values.get(0, c).is_nan() {
            return Err(Error::Imputation {
                feature: names[c].clone(),
            });
        }
        let mut last = values.get(0, c);
        for r in 1..rows {
            let v = values.get(r, c);
            if v.is_nan() {
                values.set(r, c, last);
            } else {
                last = v;
            }
        }
    }
    series.with_columns(names, values)
}

/// Names of the features whose values never move more than `epsilon` over
/// the given rows. `epsilon = 0` means exact constancy.
pub fn detect_static_features<S: FeatureSeries>(series: &S, epsilon: f64) -> Result<Vec<String>> {
    if series.values().has_nan() {
        return Err(Error::Validation(
            "static-feature detection requires imputed data (found missing cells)".into(),
        ));
    }
    let mut removed = Vec::new();
    for (c, name) in series.feature_names().iter().enumerate() {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in series.values().column(c) {
            min = min.min(v);
            max = max.max(v);
        }
        if max - min <= epsilon {
            removed.push(name.clone());
        }
    }
    Ok(removed)
}

/// Drop the named features from a series. Unknown names are an error.
pub fn drop_features<S: FeatureSeries>(series: &S, remove: &[String]) -> Result<S> {
    for name in remove {
        if !series.feature_names().iter().any(|n| n == name) {
            return Err(Error::Validation(format!(
                "cannot drop unknown feature '{name}'"
            )));
        }
    }
    let keep: Vec<usize> = (0..series.feature_count())
        .filter(|&c| !remove.contains(&series.feature_names()[c]))
        .collect();
    if keep.is_empty() {
        return Err(Error::NoInformativeFeatures);
    }
    let names: Vec<String> = keep
        .iter()
        .map(|&c| series.feature_names()[c].clone())
        .collect();
    let values = series.values().select_columns(&keep);
    series.with_columns(names, values)
}

/// Remove features that stay constant over the series; returns the reduced
/// series plus the removal list.
pub fn drop_static<S: FeatureSeries>(series: &S, epsilon: f64) -> Result<(S, Vec<String>)> {
    let removed = detect_static_features(series, epsilon)?;
    if removed.len() == series.feature_count() {
        return Err(Error::NoInformativeFeatures);
    }
    let reduced = drop_features(series, &removed)?;
    Ok((reduced, removed))
}

/// Per-feature min/max over the given (training) series.
pub fn fit_minmax<S: FeatureSeries>(series: &S) -> Result<MinMaxParams> {
    if series.values().has_nan() {
        return Err(Error::Validation(
            "min-max fitting requires imputed data (found missing cells)".into(),
        ));
    }
    let mut features = Vec::with_capacity(series.feature_count());
    for (c, name) in series.feature_names().iter().enumerate() {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in series.values().column(c) {
            min = min.min(v);
            max = max.max(v);
        }
        if max == min {
            return Err(Error::Validation(format!(
                "feature '{name}' is constant over the fitted range; drop static features first"
            )));
        }
        features.push(FeatureRange {
            name: name.clone(),
            min,
            max,
        });
    }
    Ok(MinMaxParams { features })
}

/// Map every value through `(v - min) / (max - min)` with the feature's
/// fitted bounds. Training data lands in [0, 1]; out-of-range (test) values
/// are intentionally not clamped.
pub fn apply_minmax<S: FeatureSeries>(series: &S, params: &MinMaxParams) -> Result<S> {
    let names = series.feature_names().to_vec();
    let mut values = series.values().clone();
    for (c, name) in names.iter().enumerate() {
        let range = params.lookup(name).ok_or_else(|| {
            Error::Validation(format!("no normalization parameters for feature '{name}'"))
        })?;
        let scale = range.max - range.min;
        for r in 0..values.rows() {
            let v = values.get(r, c);
            values.set(r, c, (v - range.min) / scale);
        }
    }
    series.with_columns(names, values)
}

/// Split the dataset at `spec.boundary`: rows (and labels) with
/// `t < boundary` form the training side, the rest the test side. Every
/// record lands on exactly one side.
pub fn chronological_split(
    dataset: &HeterogeneousDataset,
    spec: &SplitSpec,
) -> Result<(HeterogeneousDataset, HeterogeneousDataset)> {
    let (lo, hi) = dataset.span();
    let b = spec.boundary;
    if b <= lo || b > hi {
        return Err(Error::Validation(format!(
            "split boundary {b} must lie strictly inside the span [{lo}, {hi}]"
        )));
    }

    let sensor_cut = (b.0 - lo.0) as usize;
    let sensor_train = dataset.sensor.slice_rows(0..sensor_cut)?;
    let sensor_test = dataset.sensor.slice_rows(sensor_cut..dataset.sensor.len())?;

    let op_ts = dataset.opcycle.timestamps();
    let op_cut = op_ts.partition_point(|t| *t < b);
    if op_cut == 0 {
        return Err(Error::Validation(format!(
            "no operation-cycle rows before boundary {b}; nothing to train on"
        )));
    }
    if op_cut == op_ts.len() {
        return Err(Error::Validation(format!(
            "no operation-cycle rows at or after boundary {b}; nothing to test on"
        )));
    }
    let op_train = dataset.opcycle.slice_rows(0..op_cut)?;
    let op_test = dataset.opcycle.slice_rows(op_cut..op_ts.len())?;

    let (labels_train, labels_test) = match &dataset.labels {
        None => (None, None),
        Some(labels) => {
            let cut = labels.points().partition_point(|t| *t < b);
            let train = crate::timeseries::AlarmLabels::new(labels.points()[..cut].to_vec())?;
            let test = crate::timeseries::AlarmLabels::new(labels.points()[cut..].to_vec())?;
            (Some(train), Some(test))
        }
    };

    Ok((
        HeterogeneousDataset::new(op_train, sensor_train, labels_train)?,
        HeterogeneousDataset::new(op_test, sensor_test, labels_test)?,
    ))
}

/// Knobs for the composed preprocessing pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Maximum spread a feature may have over the training rows and still be
    /// discarded as static. Zero keeps the strict "never changes" reading.
    pub static_epsilon: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            static_epsilon: 0.0,
        }
    }
}

/// Output of [`prepare`]: the split, normalized dataset plus everything
/// needed to preprocess future data the same way.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub train: HeterogeneousDataset,
    pub test: HeterogeneousDataset,
    pub opcycle_minmax: MinMaxParams,
    pub sensor_minmax: MinMaxParams,
    pub removed_opcycle: Vec<String>,
    pub removed_sensor: Vec<String>,
}

/// Run the full pipeline in the canonical order. Static features are
/// detected on the training portion only and removed everywhere; min-max
/// bounds are fitted on the training side and applied unclamped to both.
pub fn prepare(
    dataset: &HeterogeneousDataset,
    spec: &SplitSpec,
    config: &PreprocessConfig,
) -> Result<PreparedDataset> {
    let opcycle = forward_fill(&dataset.opcycle)?;
    let sensor = forward_fill(&dataset.sensor)?;

    // Peek at the training rows to decide which features are static.
    let (lo, hi) = dataset.span();
    if spec.boundary <= lo || spec.boundary > hi {
        return Err(Error::Validation(format!(
            "split boundary {} must lie strictly inside the span [{lo}, {hi}]",
            spec.boundary
        )));
    }
    let op_cut = opcycle
        .timestamps()
        .partition_point(|t| *t < spec.boundary);
    if op_cut == 0 {
        return Err(Error::Validation(format!(
            "no operation-cycle rows before boundary {}; nothing to train on",
            spec.boundary
        )));
    }
    let sensor_cut = (spec.boundary.0 - lo.0) as usize;
    let removed_opcycle =
        detect_static_features(&opcycle.slice_rows(0..op_cut)?, config.static_epsilon)?;
    let removed_sensor =
        detect_static_features(&sensor.slice_rows(0..sensor_cut)?, config.static_epsilon)?;

    let opcycle = if removed_opcycle.is_empty() {
        opcycle
    } else {
        drop_features(&opcycle, &removed_opcycle)?
    };
    let sensor = if removed_sensor.is_empty() {
        sensor
    } else {
        drop_features(&sensor, &removed_sensor)?
    };

    let full = HeterogeneousDataset::new(opcycle, sensor, dataset.labels.clone())?;
    let (train, test) = chronological_split(&full, spec)?;

    let opcycle_minmax = fit_minmax(&train.opcycle)?;
    let sensor_minmax = fit_minmax(&train.sensor)?;

    let train = HeterogeneousDataset::new(
        apply_minmax(&train.opcycle, &opcycle_minmax)?,
        apply_minmax(&train.sensor, &sensor_minmax)?,
        train.labels,
    )?;
    let test = HeterogeneousDataset::new(
        apply_minmax(&test.opcycle, &opcycle_minmax)?,
        apply_minmax(&test.sensor, &sensor_minmax)?,
        test.labels,
    )?;

    log::info!(
        "preprocessing kept {} operation-cycle and {} sensor features (removed {:?} / {:?})",
        train.opcycle.feature_count(),
        train.sensor.feature_count(),
        removed_opcycle,
        removed_sensor
    );

    Ok(PreparedDataset {
        train,
        test,
        opcycle_minmax,
        sensor_minmax,
        removed_opcycle,
        removed_sensor,
    })
}

/// Write normalization parameters to a JSON sidecar file.
pub fn save_minmax(params: &MinMaxParams, path: &std::path::Path) -> Result<()> {
    let text = serde_json::to_string_pretty(params)
        .map_err(|e| Error::Validation(format!("could not serialize parameters: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read normalization parameters back from JSON.
pub fn load_minmax(path: &std::path::Path) -> Result<MinMaxParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))
}
