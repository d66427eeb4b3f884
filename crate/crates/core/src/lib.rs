//! Two-stage anomaly detection for heterogeneous multivariate time series.
//!
//! The pipeline reconstructs two signal families with dedicated models — a
//! dense autoencoder for irregular operation-cycle rows and an LSTM
//! encoder–decoder for sliding windows of 1 Hz sensor data — and turns the
//! reconstruction errors into two anomaly-score series. Detection then runs
//! in two stages: timestamps whose operation-cycle score exceeds τ₁ become
//! candidates, and candidates whose sensor-score neighborhood stays below τ₂
//! are filtered out as false alarms. Range-wise precision/recall against
//! alarm labels, threshold sweeps, single-stage baselines and a synthetic
//! data generator round out the toolkit.

pub mod baselines;
pub mod bench;
pub mod detector;
pub mod error;
pub mod evaluate;
pub mod linalg;
pub mod neuralnet;
pub mod pipeline;
pub mod preprocess;
pub mod scoring;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
