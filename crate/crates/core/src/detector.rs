//! Two-stage detection.
//!
//! Stage I turns the operation-cycle score series into anomaly candidates:
//! every timestamp with a_t^(o) strictly above τ₁. Stage II then interrogates
//! the sensor scores around each candidate — if the maximum sensor score in
//! the closed neighborhood [t−η, t+η] stays strictly below τ₂, no sensor
//! corroborates the event and the candidate is filtered out as a false
//! alarm. What survives is the detection set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::{LstmEncoderDecoder, MlpAutoencoder};
use crate::scoring::{score_opcycle, score_sensor, WindowConfig};
use crate::timeseries::{OperationCycleSeries, ScoreSeries, SensorSeries, Timestamp};

/// Thresholds and window radii of the two detection stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Stage I threshold on operation-cycle scores (strictly above selects).
    pub tau1: f64,
    /// Stage II threshold on sensor scores (neighborhood max strictly below
    /// filters). 0 keeps every candidate, disabling Stage II: scores are
    /// non-negative, so `max < 0` never holds.
    pub tau2: f64,
    /// Half-width, in seconds, of the closed sensor-score neighborhood
    /// [t−η, t+η] examined around each candidate.
    pub eta_s: u64,
    /// Matching tolerance, in seconds, used by the evaluation metrics; kept
    /// here so one config block describes a full detection run.
    pub delta_s: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            // The thresholds have no universal default — they are data-scale
            // dependent and normally come from a sweep; 1.0 is a placeholder
            // callers are expected to override.
            tau1: 1.0,
            tau2: 1.0,
            eta_s: 14,
            delta_s: 600,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tau1.is_finite() || self.tau1 <= 0.0 {
            return Err(Error::Config(format!(
                "tau1 must be finite and > 0 (got {})",
                self.tau1
            )));
        }
        if !self.tau2.is_finite() || self.tau2 < 0.0 {
            return Err(Error::Config(format!(
                "tau2 must be finite and >= 0 (got {})",
                self.tau2
            )));
        }
        if self.eta_s == 0 {
            return Err(Error::Config("eta_s must be positive".into()));
        }
        if self.delta_s == 0 {
            return Err(Error::Config("delta_s must be positive".into()));
        }
        Ok(())
    }
}

/// Stage I output: candidate timestamps with the operation-cycle scores
/// that promoted them (kept for the audit trail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    entries: Vec<(Timestamp, f64)>,
}

impl CandidateSet {
    pub fn entries(&self) -> &[(Timestamp, f64)] {
        &self.entries
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.entries.iter().map(|(t, _)| *t).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-candidate evidence recorded by Stage II.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp: Timestamp,
    /// Stage I score that made this timestamp a candidate.
    pub op_score: f64,
    /// Maximum sensor score over [t−η, t+η]; `None` when not a single
    /// sensor score falls in the neighborhood (a coverage gap).
    pub sensor_max: Option<f64>,
    /// Whether the candidate survived Stage II.
    pub kept: bool,
}

/// Final partition of the Stage I candidates, with one audit row each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detected: Vec<Timestamp>,
    pub filtered: Vec<Timestamp>,
    pub audit: Vec<AuditRecord>,
}

impl DetectionResult {
    /// Candidates whose whole neighborhood carried no sensor score. They are
    /// kept (filtering requires positive evidence of low scores), but the
    /// gap is worth surfacing.
    pub fn coverage_gaps(&self) -> usize {
        self.audit.iter().filter(|r| r.sensor_max.is_none()).count()
    }
}

/// Stage I: exactly the timestamps scoring strictly above τ₁.
pub fn stage1_select(op_scores: &ScoreSeries, tau1: f64) -> CandidateSet {
    CandidateSet {
        entries: op_scores
            .entries()
            .iter()
            .copied()
            .filter(|(_, s)| *s > tau1)
            .collect(),
    }
}

/// Stage II: remove every candidate whose closed neighborhood [t−η, t+η]
/// has all its sensor scores strictly below τ₂ (equivalently, whose
/// neighborhood max is < τ₂). Candidates with no sensor coverage at all are
/// kept and logged — absence of evidence is not evidence of absence.
pub fn stage2_filter(
    candidates: &CandidateSet,
    sensor_scores: &ScoreSeries,
    tau2: f64,
    eta_s: u64,
) -> DetectionResult {
    let mut detected = Vec::new();
    let mut filtered = Vec::new();
    let mut audit = Vec::with_capacity(candidates.len());
    for &(t, op_score) in candidates.entries() {
        let sensor_max = sensor_scores.max_in_window(t.minus_clamped(eta_s), t.plus(eta_s));
        let kept = match sensor_max {
            Some(m) => !(m < tau2),
            None => {
                log::warn!(
                    "no sensor scores within {eta_s} s of candidate {t}; keeping it unfiltered"
                );
                true
            }
        };
        if kept {
            detected.push(t);
        } else {
            filtered.push(t);
        }
        audit.push(AuditRecord {
            timestamp: t,
            op_score,
            sensor_max,
            kept,
        });
    }
    DetectionResult {
        detected,
        filtered,
        audit,
    }
}

/// Both stages on precomputed score series.
pub fn detect_from_scores(
    op_scores: &ScoreSeries,
    sensor_scores: &ScoreSeries,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    cfg.validate()?;
    Ok(stage2_filter(
        &stage1_select(op_scores, cfg.tau1),
        sensor_scores,
        cfg.tau2,
        cfg.eta_s,
    ))
}

/// The full detection pipeline on preprocessed test data: score both signal
/// families with their trained models, then run the two stages.
pub fn detect(
    op_model: &MlpAutoencoder,
    sensor_model: &LstmEncoderDecoder,
    op: &OperationCycleSeries,
    sensor: &SensorSeries,
    window_cfg: &WindowConfig,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let op_scores = score_opcycle(op_model, op)?;
    let sensor_scores = score_sensor(sensor_model, sensor, window_cfg)?;
    detect_from_scores(&op_scores, &sensor_scores, cfg)
}
