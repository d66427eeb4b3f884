//! Run configuration: data source + pipeline settings, loaded from JSON.
//!
//! The schema is strict — unknown keys are rejected so a typo cannot
//! silently fall back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tdad_core::pipeline::PipelineConfig;
use tdad_core::synth::{generate, SynthConfig, SynthManifest};
use tdad_core::timeseries::{
    load_labels_csv, load_opcycle_csv, load_sensor_csv, HeterogeneousDataset, Timestamp,
};

use crate::error::{CliError, CliResult};

/// Where the dataset comes from: CSV files on disk or the built-in
/// generator. Exactly one of the two must be set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<CsvPaths>,
    pub synth: Option<SynthConfig>,
}

/// Input files for a recorded dataset. `alarms` may be omitted for
/// score/detect runs; eval and sweep need labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvPaths {
    pub opcycles: PathBuf,
    pub sensors: PathBuf,
    #[serde(default)]
    pub alarms: Option<PathBuf>,
}

/// Top-level configuration for train/score/detect/eval/sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    /// Train/test split boundary in seconds. Required for CSV data; for
    /// generated data it defaults to the generator's own boundary.
    pub boundary_s: Option<u64>,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig {
                csv: None,
                synth: Some(SynthConfig::default()),
            },
            boundary_s: None,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        match (&self.data.csv, &self.data.synth) {
            (Some(_), Some(_)) => Err(CliError::usage(
                "config sets both data.csv and data.synth; pick one",
            )),
            (None, None) => Err(CliError::usage(
                "config sets neither data.csv nor data.synth",
            )),
            (Some(_), None) if self.boundary_s.is_none() => Err(CliError::usage(
                "boundary_s is required when reading CSV data",
            )),
            _ => Ok(()),
        }
    }

    /// Apply the `--seed` override: it pins both the pipeline seed and, when
    /// the data is generated, the generator seed.
    pub fn override_seed(&mut self, seed: Option<u64>) {
        if let Some(seed) = seed {
            self.pipeline.seed = seed;
            if let Some(synth) = &mut self.data.synth {
                synth.seed = seed;
            }
        }
    }

    /// Materialize the dataset and the split boundary.
    pub fn load_data(&self) -> CliResult<(HeterogeneousDataset, Timestamp, Option<SynthManifest>)> {
        self.validate()?;
        if let Some(synth) = &self.data.synth {
            let (dataset, manifest) = generate(synth)?;
            let boundary = Timestamp(self.boundary_s.unwrap_or(manifest.boundary_s));
            return Ok((dataset, boundary, Some(manifest)));
        }
        let paths = self.data.csv.as_ref().expect("validated above");
        let opcycle = load_opcycle_csv(&paths.opcycles)?;
        let sensor = load_sensor_csv(&paths.sensors)?;
        let labels = match &paths.alarms {
            Some(p) => Some(load_labels_csv(p)?),
            None => None,
        };
        let dataset = HeterogeneousDataset::new(opcycle, sensor, labels)?;
        let boundary = Timestamp(self.boundary_s.expect("validated above"));
        Ok((dataset, boundary, None))
    }
}

/// Parse a strict-schema JSON config file. Any failure here — unreadable
/// file, syntax error, unknown key — is a usage error.
pub fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::usage(format!("cannot read config '{}': {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid config '{}': {e}", path.display())))
}
