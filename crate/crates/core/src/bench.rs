//! Reproducible benchmark: the two-stage pipeline against the four
//! single-stage baseline cases, on freshly generated synthetic datasets.
//!
//! One run covers several data seeds. Each seed generates its own dataset,
//! trains every model from scratch, sweeps thresholds, and records best-F1
//! metrics plus the filtering behavior at the swept optimum (how many
//! candidates near planted type-A events were kept, and how many near
//! type-B events were removed). The report is a pure function of the
//! config, so two runs with the same config serialize byte-identically.

use serde::{Deserialize, Serialize};

use crate::baselines::{single_stage_eval, Backbone, BaselineCase, BaselineConfig};
use crate::error::Result;
use crate::evaluate::{EvalConfig, EvalReport};
use crate::neuralnet::{LstmConfig, TrainConfig};
use crate::pipeline::{run, PipelineConfig};
use crate::synth::{generate, EventKind, SynthConfig};
use crate::timeseries::Timestamp;

/// Full benchmark configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Data seeds; each produces an independent dataset.
    pub seeds: Vec<u64>,
    /// Generator settings (the per-run seed overrides `synth.seed`).
    pub synth: SynthConfig,
    /// Two-stage pipeline settings.
    pub pipeline: PipelineConfig,
    /// Baseline settings (dense backbone).
    pub baseline: BaselineConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        // The sequence model is scaled down from the library defaults so a
        // five-seed benchmark finishes in minutes on a desktop CPU: fewer
        // hidden units, one layer, a capped window count, and a few epochs
        // are plenty to learn the smooth synthetic sensor manifold.
        // Anomalies are a tiny fraction of the scored rows, so the default
        // 200-point quantile grid is too coarse at the top of the score
        // distribution to land a threshold between the background tail and
        // the weakest planted event; 600 points resolve it for every
        // detector alike.
        let eval = EvalConfig {
            grid_points: 600,
            ..EvalConfig::default()
        };
        let pipeline = PipelineConfig {
            mlp_train: TrainConfig {
                epochs: 200,
                ..TrainConfig::dense_default()
            },
            lstm: LstmConfig {
                hidden_size: 16,
                num_layers: 1,
                dropout: 0.0,
                ..LstmConfig::default()
            },
            lstm_train: TrainConfig {
                epochs: 3,
                ..TrainConfig::sequence_default()
            },
            max_train_windows: Some(192),
            eval: eval.clone(),
            ..PipelineConfig::default()
        };
        let baseline = BaselineConfig {
            // The cycle-only case shares the pipeline's first-stage settings
            // so the comparison isolates the second stage.
            mlp_train: TrainConfig {
                epochs: 200,
                ..TrainConfig::dense_default()
            },
            dense_train_stride: 5,
            eval,
            ..BaselineConfig::default()
        };
        BenchConfig {
            seeds: vec![0, 1, 2, 3, 4],
            synth: SynthConfig::default(),
            pipeline,
            baseline,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(crate::error::Error::Config(
                "bench needs at least one seed".into(),
            ));
        }
        self.synth.validate()?;
        self.pipeline.validate()?;
        self.baseline.validate()
    }
}

/// Best-threshold metrics of one detector on one dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CaseResult {
    pub tau1: f64,
    pub tau2: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&EvalReport> for CaseResult {
    fn from(report: &EvalReport) -> Self {
        CaseResult {
            tau1: report.tau1,
            tau2: report.tau2,
            precision: report.metrics.precision,
            recall: report.metrics.recall,
            f1: report.metrics.f1,
        }
    }
}

/// Everything measured on one data seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub two_stage: CaseResult,
    pub c1: CaseResult,
    pub c2: CaseResult,
    pub c3: CaseResult,
    pub c4: CaseResult,
    /// First-stage candidates sitting exactly on a planted type-A event's
    /// cycle row, and how many of them survived the second stage.
    pub type_a_candidates: usize,
    pub type_a_kept: usize,
    /// Same for type-B events, counting how many were filtered out.
    pub type_b_candidates: usize,
    pub type_b_filtered: usize,
}

/// Mean best-F1 per detector across seeds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanF1 {
    pub two_stage: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// Aggregated benchmark output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub seeds: Vec<SeedOutcome>,
    pub mean_f1: MeanF1,
    /// Pooled across seeds: kept-type-A and filtered-type-B fractions at
    /// each seed's swept optimum.
    pub type_a_kept_rate: f64,
    pub type_b_filtered_rate: f64,
}

impl BenchReport {
    /// Deterministic serialization: same report, same bytes.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| {
            crate::error::Error::Validation(format!("could not serialize report: {e}"))
        })
    }
}

/// Run the full benchmark.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut outcomes = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let synth_cfg = SynthConfig {
            seed,
            ..cfg.synth.clone()
        };
        let (data, manifest) = generate(&synth_cfg)?;
        let boundary = Timestamp(manifest.boundary_s);

        let two_stage_run = run(&data, boundary, &cfg.pipeline)?;
        // Events are planted on single cycle rows, so a candidate belongs
        // to an event exactly when their timestamps coincide; incidental
        // background candidates that merely fall near an event stay out of
        // the kept/filtered bookkeeping.
        let a_times = manifest.timestamps_of(EventKind::TypeA);
        let b_times = manifest.timestamps_of(EventKind::TypeB);
        let (mut type_a_candidates, mut type_a_kept) = (0, 0);
        let (mut type_b_candidates, mut type_b_filtered) = (0, 0);
        for rec in &two_stage_run.detection.audit {
            if a_times.binary_search(&rec.timestamp).is_ok() {
                type_a_candidates += 1;
                type_a_kept += usize::from(rec.kept);
            } else if b_times.binary_search(&rec.timestamp).is_ok() {
                type_b_candidates += 1;
                type_b_filtered += usize::from(!rec.kept);
            }
        }

        let mut case_results = Vec::with_capacity(4);
        for case in BaselineCase::ALL {
            let report =
                single_stage_eval(&data, boundary, Backbone::MlpDae, case, &cfg.baseline)?;
            case_results.push(CaseResult::from(&report));
        }

        let outcome = SeedOutcome {
            seed,
            two_stage: CaseResult::from(&two_stage_run.report),
            c1: case_results[0],
            c2: case_results[1],
            c3: case_results[2],
            c4: case_results[3],
            type_a_candidates,
            type_a_kept,
            type_b_candidates,
            type_b_filtered,
        };
        log::info!(
            "seed {seed}: two-stage F1 {:.3} | C1 {:.3} C2 {:.3} C3 {:.3} C4 {:.3} | \
             A kept {}/{} B filtered {}/{}",
            outcome.two_stage.f1,
            outcome.c1.f1,
            outcome.c2.f1,
            outcome.c3.f1,
            outcome.c4.f1,
            outcome.type_a_kept,
            outcome.type_a_candidates,
            outcome.type_b_filtered,
            outcome.type_b_candidates,
        );
        outcomes.push(outcome);
    }

    let n = outcomes.len() as f64;
    let mean = |pick: fn(&SeedOutcome) -> f64| outcomes.iter().map(pick).sum::<f64>() / n;
    let mean_f1 = MeanF1 {
        two_stage: mean(|o| o.two_stage.f1),
        c1: mean(|o| o.c1.f1),
        c2: mean(|o| o.c2.f1),
        c3: mean(|o| o.c3.f1),
        c4: mean(|o| o.c4.f1),
    };
    let pooled = |num: fn(&SeedOutcome) -> usize, den: fn(&SeedOutcome) -> usize| {
        let d: usize = outcomes.iter().map(den).sum();
        if d == 0 {
            0.0
        } else {
            outcomes.iter().map(num).sum::<usize>() as f64 / d as f64
        }
    };
    let type_a_kept_rate = pooled(|o| o.type_a_kept, |o| o.type_a_candidates);
    let type_b_filtered_rate = pooled(|o| o.type_b_filtered, |o| o.type_b_candidates);
    Ok(BenchReport {
        seeds: outcomes,
        mean_f1,
        type_a_kept_rate,
        type_b_filtered_rate,
    })
}
