//! The eight subcommands. Each one validates its configuration, does the
//! work through the library crate, writes artifacts into a fresh run
//! directory and prints a one-line summary per major result.

use std::path::Path;

use tdad_core::bench::{run_bench, BenchConfig};
use tdad_core::detector::{detect_from_scores, DetectorConfig};
use tdad_core::evaluate::{best_f1_sweep, save_surface_csv, EvalConfig};
use tdad_core::neuralnet::gradcheck::{grad_check, GradCheckReport, ModelKind};
use tdad_core::neuralnet::{save_lstm, save_mlp};
use tdad_core::pipeline::train_models;
use tdad_core::preprocess::{prepare, save_minmax, PreparedDataset, SplitSpec};
use tdad_core::scoring::{score_opcycle, score_sensor};
use tdad_core::synth::{generate, SynthConfig};
use tdad_core::timeseries::{
    save_labels_csv, save_opcycle_csv, save_scores_csv, save_sensor_csv, AlarmLabels,
    FeatureSeries, ScoreSeries,
};

use crate::config::{load_json_config, RunConfig};
use crate::error::{CliError, CliResult};
use crate::rundir::{create_run_dir, write_json, write_loss_csv};

/// Scores for the held-out region plus everything needed to evaluate them.
struct ScoredRun {
    config: RunConfig,
    op_scores: ScoreSeries,
    sensor_scores: ScoreSeries,
    labels: Option<AlarmLabels>,
}

/// Shared front half of score/detect/eval/sweep: load data, preprocess,
/// train both models, score the held-out region.
fn score_run(config_path: Option<&Path>, seed: Option<u64>) -> CliResult<ScoredRun> {
    let mut config: RunConfig = match config_path {
        Some(p) => load_json_config(p)?,
        None => RunConfig::default(),
    };
    config.override_seed(seed);
    config.pipeline.validate()?;
    let (dataset, boundary, _) = config.load_data()?;
    let prepared = prepare(&dataset, &SplitSpec { boundary }, &config.pipeline.preprocess)?;
    let models = train_models(&prepared, &config.pipeline)?;
    let op_scores = score_opcycle(&models.op_model, &prepared.test.opcycle)?;
    let sensor_scores = score_sensor(
        &models.sensor_model,
        &prepared.test.sensor,
        &config.pipeline.window,
    )?;
    Ok(ScoredRun {
        config,
        op_scores,
        sensor_scores,
        labels: prepared.test.labels.clone(),
    })
}

/// Resolve the thresholds for detect/eval: flags override the config's
/// detector block. τ1 must be strictly positive; τ2 may be 0 (Stage II off).
fn resolve_thresholds(
    cfg: &DetectorConfig,
    tau1: Option<f64>,
    tau2: Option<f64>,
) -> CliResult<(f64, f64)> {
    let tau1 = tau1.unwrap_or(cfg.tau1);
    let tau2 = tau2.unwrap_or(cfg.tau2);
    if !tau1.is_finite() || tau1 <= 0.0 {
        return Err(CliError::usage(format!(
            "tau1 must be finite and > 0 (got {tau1})"
        )));
    }
    if !tau2.is_finite() || tau2 < 0.0 {
        return Err(CliError::usage(format!(
            "tau2 must be finite and >= 0 (got {tau2})"
        )));
    }
    Ok((tau1, tau2))
}

fn require_labels(run: &ScoredRun) -> CliResult<AlarmLabels> {
    run.labels.clone().ok_or_else(|| {
        CliError::usage("this command needs alarm labels, but the dataset has none")
    })
}

pub fn cmd_synth(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    let mut config: SynthConfig = match config_path {
        Some(p) => load_json_config(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let (dataset, manifest) = generate(&config)?;
    let dir = create_run_dir(out, "synth", run_id)?;
    write_json(&dir.join("config.json"), &config)?;
    save_opcycle_csv(&dataset.opcycle, &dir.join("opcycles.csv"))?;
    save_sensor_csv(&dataset.sensor, &dir.join("sensors.csv"))?;
    let labels = dataset.labels.as_ref().expect("generator always labels");
    save_labels_csv(labels, &dir.join("alarms.csv"))?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    println!(
        "synth: {} cycle rows, {} sensor rows, {} alarms -> {}",
        dataset.opcycle.timestamps().len(),
        dataset.sensor.len(),
        labels.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_train(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    let mut config: RunConfig = match config_path {
        Some(p) => load_json_config(p)?,
        None => RunConfig::default(),
    };
    config.override_seed(seed);
    config.pipeline.validate()?;
    let (dataset, boundary, _) = config.load_data()?;
    let prepared = prepare(&dataset, &SplitSpec { boundary }, &config.pipeline.preprocess)?;
    let models = train_models(&prepared, &config.pipeline)?;

    let dir = create_run_dir(out, "train", run_id)?;
    write_json(&dir.join("config.json"), &config)?;
    save_mlp(&models.op_model, &dir.join("op_model.json"))?;
    save_lstm(&models.sensor_model, &dir.join("sensor_model.json"))?;
    write_loss_csv(&dir.join("op_loss.csv"), &models.op_history)?;
    write_loss_csv(&dir.join("sensor_loss.csv"), &models.sensor_history)?;
    save_minmax(&prepared.opcycle_minmax, &dir.join("opcycle_minmax.json"))?;
    save_minmax(&prepared.sensor_minmax, &dir.join("sensor_minmax.json"))?;
    write_json(&dir.join("preprocess.json"), &removed_summary(&prepared))?;
    println!(
        "train: op loss {:.6} -> {:.6}, sensor loss {:.6} -> {:.6} -> {}",
        models.op_history.first().copied().unwrap_or(f64::NAN),
        models.op_history.last().copied().unwrap_or(f64::NAN),
        models.sensor_history.first().copied().unwrap_or(f64::NAN),
        models.sensor_history.last().copied().unwrap_or(f64::NAN),
        dir.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct RemovedSummary {
    removed_opcycle_features: Vec<String>,
    removed_sensor_features: Vec<String>,
}

fn removed_summary(prepared: &PreparedDataset) -> RemovedSummary {
    RemovedSummary {
        removed_opcycle_features: prepared.removed_opcycle.clone(),
        removed_sensor_features: prepared.removed_sensor.clone(),
    }
}

pub fn cmd_score(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    let run = score_run(config_path, seed)?;
    let dir = create_run_dir(out, "score", run_id)?;
    write_json(&dir.join("config.json"), &run.config)?;
    save_scores_csv(&run.op_scores, &dir.join("op_scores.csv"))?;
    save_scores_csv(&run.sensor_scores, &dir.join("sensor_scores.csv"))?;
    println!(
        "score: {} cycle scores, {} sensor scores -> {}",
        run.op_scores.len(),
        run.sensor_scores.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_detect(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    // Validate the thresholds before spending time on training.
    {
        let config: RunConfig = match config_path {
            Some(p) => load_json_config(p)?,
            None => RunConfig::default(),
        };
        resolve_thresholds(&config.pipeline.detector, tau1, tau2)?;
    }
    let mut run = score_run(config_path, seed)?;
    let (tau1, tau2) = resolve_thresholds(&run.config.pipeline.detector, tau1, tau2)?;
    run.config.pipeline.detector.tau1 = tau1;
    run.config.pipeline.detector.tau2 = tau2;
    let result = detect_from_scores(
        &run.op_scores,
        &run.sensor_scores,
        &run.config.pipeline.detector,
    )?;

    let dir = create_run_dir(out, "detect", run_id)?;
    write_json(&dir.join("config.json"), &run.config)?;
    write_json(&dir.join("detection.json"), &result)?;
    let detected = ScoreSeries::new(
        result
            .audit
            .iter()
            .filter(|r| r.kept)
            .map(|r| (r.timestamp, r.op_score))
            .collect(),
    )?;
    save_scores_csv(&detected, &dir.join("detections.csv"))?;
    println!(
        "detect: {} candidates, {} kept, {} filtered, {} coverage gaps -> {}",
        result.audit.len(),
        result.detected.len(),
        result.filtered.len(),
        result.coverage_gaps(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_eval(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    {
        let config: RunConfig = match config_path {
            Some(p) => load_json_config(p)?,
            None => RunConfig::default(),
        };
        resolve_thresholds(&config.pipeline.detector, tau1, tau2)?;
    }
    let run = score_run(config_path, seed)?;
    let labels = require_labels(&run)?;
    let (tau1, tau2) = resolve_thresholds(&run.config.pipeline.detector, tau1, tau2)?;

    // A singleton sweep IS the point evaluation; sharing the code path makes
    // "sweep over one-point grids equals eval" true by construction.
    let eval_cfg = EvalConfig {
        tau1_grid: Some(vec![tau1]),
        tau2_grid: Some(vec![tau2]),
        ..run.config.pipeline.eval.clone()
    };
    let report = best_f1_sweep(
        &run.op_scores,
        &run.sensor_scores,
        &labels,
        &eval_cfg,
        run.config.pipeline.detector.eta_s,
    )?;

    let mut config = run.config.clone();
    config.pipeline.detector.tau1 = tau1;
    config.pipeline.detector.tau2 = tau2;
    let dir = create_run_dir(out, "eval", run_id)?;
    write_json(&dir.join("config.json"), &config)?;
    write_json(&dir.join("eval.json"), &report)?;
    save_surface_csv(&dir.join("surface.csv"), &report.surface)?;
    println!(
        "eval: tau1={} tau2={} precision={:.4} recall={:.4} f1={:.4} -> {}",
        report.tau1,
        report.tau2,
        report.metrics.precision,
        report.metrics.recall,
        report.metrics.f1,
        dir.display()
    );
    Ok(())
}

pub fn cmd_sweep(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    let run = score_run(config_path, seed)?;
    let labels = require_labels(&run)?;
    let report = best_f1_sweep(
        &run.op_scores,
        &run.sensor_scores,
        &labels,
        &run.config.pipeline.eval,
        run.config.pipeline.detector.eta_s,
    )?;
    // Detection at the swept optimum, for the audit trail. The stage
    // functions are driven directly because a swept τ1 may sit on the
    // grid's zero endpoint, which a hand-written config would reject.
    let detection = tdad_core::detector::stage2_filter(
        &tdad_core::detector::stage1_select(&run.op_scores, report.tau1),
        &run.sensor_scores,
        report.tau2,
        run.config.pipeline.detector.eta_s,
    );

    let dir = create_run_dir(out, "sweep", run_id)?;
    write_json(&dir.join("config.json"), &run.config)?;
    write_json(&dir.join("report.json"), &report)?;
    save_surface_csv(&dir.join("surface.csv"), &report.surface)?;
    write_json(&dir.join("detection.json"), &detection)?;
    println!(
        "sweep: best tau1={} tau2={} f1={:.4} over {} grid points -> {}",
        report.tau1,
        report.tau2,
        report.metrics.f1,
        report.surface.len(),
        dir.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct GradCheckSummary {
    seeds: u64,
    mlp_max_rel_error: f64,
    mlp_tolerance: f64,
    lstm_max_rel_error: f64,
    lstm_tolerance: f64,
    passed: bool,
    reports: Vec<GradCheckReport>,
}

pub fn cmd_gradcheck(seeds: u64, out: Option<&Path>, run_id: Option<&str>) -> CliResult<()> {
    if seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let mut reports = Vec::new();
    for seed in 0..seeds {
        reports.push(grad_check(ModelKind::Mlp, seed)?);
        reports.push(grad_check(ModelKind::Lstm, seed)?);
    }
    let max_of = |kind: ModelKind| {
        reports
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.max_rel_error)
            .fold(0.0_f64, f64::max)
    };
    let tol_of = |kind: ModelKind| {
        reports
            .iter()
            .find(|r| r.kind == kind)
            .map(|r| r.tolerance)
            .unwrap_or(f64::NAN)
    };
    let summary = GradCheckSummary {
        seeds,
        mlp_max_rel_error: max_of(ModelKind::Mlp),
        mlp_tolerance: tol_of(ModelKind::Mlp),
        lstm_max_rel_error: max_of(ModelKind::Lstm),
        lstm_tolerance: tol_of(ModelKind::Lstm),
        passed: reports.iter().all(|r| r.passed()),
        reports,
    };
    if let Some(out) = out {
        let dir = create_run_dir(out, "gradcheck", run_id)?;
        write_json(&dir.join("gradcheck.json"), &summary)?;
    }
    println!(
        "gradcheck: {} seeds, dense max rel err {:.3e} (tol {:.0e}), sequence max rel err {:.3e} (tol {:.0e}) -> {}",
        seeds,
        summary.mlp_max_rel_error,
        summary.mlp_tolerance,
        summary.lstm_max_rel_error,
        summary.lstm_tolerance,
        if summary.passed { "PASS" } else { "FAIL" }
    );
    if summary.passed {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow::anyhow!(
            "gradient check failed: analytic and numeric gradients disagree"
        )))
    }
}

pub fn cmd_bench(
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    run_id: Option<&str>,
) -> CliResult<()> {
    let mut config: BenchConfig = match config_path {
        Some(p) => load_json_config(p)?,
        None => BenchConfig::default(),
    };
    if let Some(seed) = seed {
        config.seeds = vec![seed];
    }
    let report = run_bench(&config)?;
    let dir = create_run_dir(out, "bench", run_id)?;
    write_json(&dir.join("config.json"), &config)?;
    let json = report.to_json()?;
    std::fs::write(dir.join("bench.json"), json.as_bytes()).map_err(|e| {
        CliError::Runtime(anyhow::anyhow!("write '{}': {e}", dir.display()))
    })?;
    println!(
        "bench: mean F1 two-stage={:.4} c1={:.4} c2={:.4} c3={:.4} c4={:.4} kept={:.2} filtered={:.2} -> {}",
        report.mean_f1.two_stage,
        report.mean_f1.c1,
        report.mean_f1.c2,
        report.mean_f1.c3,
        report.mean_f1.c4,
        report.type_a_kept_rate,
        report.type_b_filtered_rate,
        dir.display()
    );
    Ok(())
}

/// Clap-level plumbing shared by `main`: all subcommands funnel here.
#[allow(clippy::too_many_arguments)]
pub fn dispatch(
    cmd: crate::Cmd,
    run_id: Option<String>,
) -> CliResult<()> {
    use crate::Cmd;
    let rid = run_id.as_deref();
    match cmd {
        Cmd::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed, rid),
        Cmd::Train { config, out, seed } => cmd_train(config.as_deref(), &out, seed, rid),
        Cmd::Score { config, out, seed } => cmd_score(config.as_deref(), &out, seed, rid),
        Cmd::Detect {
            config,
            out,
            seed,
            tau1,
            tau2,
        } => cmd_detect(config.as_deref(), &out, seed, tau1, tau2, rid),
        Cmd::Eval {
            config,
            out,
            seed,
            tau1,
            tau2,
        } => cmd_eval(config.as_deref(), &out, seed, tau1, tau2, rid),
        Cmd::Sweep { config, out, seed } => cmd_sweep(config.as_deref(), &out, seed, rid),
        Cmd::Gradcheck { seeds, out } => cmd_gradcheck(seeds, out.as_deref(), rid),
        Cmd::Bench { config, out, seed } => cmd_bench(config.as_deref(), &out, seed, rid),
    }
}
