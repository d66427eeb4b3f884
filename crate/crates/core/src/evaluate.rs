//! Range-wise precision/recall and the two-threshold F1 sweep.
//!
//! A detection is credited when a true alarm lies within δ seconds of it,
//! and an alarm is credited when some detection lies within δ of it — each
//! side is counted against its own definition, with no one-to-one matching.
//! Thresholds are chosen by exhaustive search over a grid, maximizing F1 on
//! the test data; that "best possible F1" is the figure of merit throughout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::timeseries::{AlarmLabels, ScoreSeries, Timestamp};

/// Matching tolerance and sweep-grid construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Half-width, in seconds, of the closed interval around a timestamp
    /// within which a detection and an alarm count as matching.
    pub delta_s: u64,
    /// Number of quantile points per threshold grid (the endpoints 0 and
    /// max+ε are always added on top).
    pub grid_points: usize,
    /// Explicit τ₁ grid; when set it replaces the quantile construction.
    pub tau1_grid: Option<Vec<f64>>,
    /// Explicit τ₂ grid; when set it replaces the quantile construction.
    pub tau2_grid: Option<Vec<f64>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            delta_s: 600,
            grid_points: 200,
            tau1_grid: None,
            tau2_grid: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_s == 0 {
            return Err(Error::Config("delta_s must be positive".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("grid_points must be at least 2".into()));
        }
        for (name, grid) in [("tau1_grid", &self.tau1_grid), ("tau2_grid", &self.tau2_grid)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(Error::Config(format!("{name} must not be empty")));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be finite")));
                }
                if g.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config(format!(
                        "{name} must be sorted strictly ascending"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Precision/recall/F1 with explicit undefinedness: an empty detection set
/// has no meaningful precision (reported as 0 and flagged, never as 1, so a
/// sweep cannot reward degenerate thresholds), and an empty alarm set has
/// no meaningful recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

/// Harmonic mean of precision and recall; 0 when both vanish.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Is some element of `sorted` within the closed interval
/// [t−delta, t+delta]?
pub(crate) fn has_neighbor(sorted: &[Timestamp], t: Timestamp, delta_s: u64) -> bool {
    let lo = t.minus_clamped(delta_s);
    let from = sorted.partition_point(|u| *u < lo);
    sorted.get(from).is_some_and(|u| *u <= t.plus(delta_s))
}

/// Range-wise precision and recall: precision is the fraction of detections
/// with some alarm within δ, recall the fraction of alarms with some
/// detection within δ. Both inputs must be sorted ascending.
pub fn range_precision_recall(
    detected: &[Timestamp],
    alarms: &AlarmLabels,
    delta_s: u64,
) -> Metrics {
    debug_assert!(detected.windows(2).all(|w| w[0] < w[1]));
    let alarm_points = alarms.points();
    let (precision, precision_undefined) = if detected.is_empty() {
        (0.0, true)
    } else {
        let hits = detected
            .iter()
            .filter(|d| has_neighbor(alarm_points, **d, delta_s))
            .count();
        (hits as f64 / detected.len() as f64, false)
    };
    let (recall, recall_undefined) = if alarm_points.is_empty() {
        (0.0, true)
    } else {
        let hits = alarm_points
            .iter()
            .filter(|a| has_neighbor(detected, **a, delta_s))
            .count();
        (hits as f64 / alarm_points.len() as f64, false)
    };
    Metrics {
        precision,
        recall,
        f1: f1(precision, recall),
        precision_undefined,
        recall_undefined,
    }
}

/// Threshold grid from observed scores: `grid_points` uniform quantiles of
/// the score distribution, plus 0 and a value strictly above the maximum,
/// sorted and deduplicated. Quantile grids adapt to the score scale, so the
/// sweep needs no hand-tuned ranges.
pub fn quantile_grid(scores: &ScoreSeries, grid_points: usize) -> Vec<f64> {
    let mut values: Vec<f64> = scores.values().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let mut grid = vec![0.0];
    if let Some(&max) = values.last() {
        for i in 0..grid_points {
            let q = i as f64 / (grid_points - 1) as f64;
            let idx = (q * (values.len() - 1) as f64).round() as usize;
            grid.push(values[idx]);
        }
        grid.push(max * (1.0 + 1e-9) + 1e-12);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    grid.dedup();
    grid
}

/// One grid point of the sweep surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub tau1: f64,
    pub tau2: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Outcome of a two-threshold sweep: the argmax pair, its metrics, and the
/// full F1 surface for external plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub tau1: f64,
    pub tau2: f64,
    pub metrics: Metrics,
    pub surface: Vec<SurfaceRow>,
}

/// Evaluate the two-stage detector at one (τ₁, τ₂) point against the alarm
/// labels. Candidates with an uncovered sensor neighborhood are kept, as in
/// the detector itself.
pub fn evaluate_at(
    op_scores: &ScoreSeries,
    sensor_scores: &ScoreSeries,
    alarms: &AlarmLabels,
    tau1: f64,
    tau2: f64,
    eta_s: u64,
    delta_s: u64,
) -> Metrics {
    let result = crate::detector::stage2_filter(
        &crate::detector::stage1_select(op_scores, tau1),
        sensor_scores,
        tau2,
        eta_s,
    );
    range_precision_recall(&result.detected, alarms, delta_s)
}

/// Exhaustive search for the F1-maximizing threshold pair.
///
/// The score series are threshold-independent, so each candidate's sensor
/// neighborhood max and alarm proximity are computed once; every grid point
/// is then a cheap filter. Ties are broken toward the smaller τ₁, then the
/// smaller τ₂. Grid rows are evaluated in parallel; the argmax fold runs in
/// ascending grid order, so the result is deterministic.
pub fn best_f1_sweep(
    op_scores: &ScoreSeries,
    sensor_scores: &ScoreSeries,
    alarms: &AlarmLabels,
    cfg: &EvalConfig,
    eta_s: u64,
) -> Result<EvalReport> {
    cfg.validate()?;
    let tau1_grid = cfg
        .tau1_grid
        .clone()
        .unwrap_or_else(|| quantile_grid(op_scores, cfg.grid_points));
    let tau2_grid = cfg
        .tau2_grid
        .clone()
        .unwrap_or_else(|| quantile_grid(sensor_scores, cfg.grid_points));
    if tau1_grid.is_empty() || tau2_grid.is_empty() {
        return Err(Error::Config("sweep grids must not be empty".into()));
    }

    // Per-candidate facts shared by the whole grid.
    let entries: Vec<(Timestamp, f64, Option<f64>, bool)> = op_scores
        .entries()
        .iter()
        .map(|&(t, score)| {
            let nb_max = sensor_scores.max_in_window(t.minus_clamped(eta_s), t.plus(eta_s));
            let near_alarm = has_neighbor(alarms.points(), t, cfg.delta_s);
            (t, score, nb_max, near_alarm)
        })
        .collect();
    // For recall: which op timestamps could credit each alarm.
    let alarm_windows: Vec<(usize, usize)> = alarms
        .points()
        .iter()
        .map(|a| {
            let lo = entries.partition_point(|(t, ..)| *t < a.minus_clamped(cfg.delta_s));
            let hi = entries.partition_point(|(t, ..)| *t <= a.plus(cfg.delta_s));
            (lo, hi)
        })
        .collect();

    let evaluate_point = |tau1: f64, tau2: f64| -> SurfaceRow {
        let mut detected = 0usize;
        let mut detected_near_alarm = 0usize;
        for &(_, score, nb_max, near_alarm) in &entries {
            if score > tau1 && nb_max.map_or(true, |m| !(m < tau2)) {
                detected += 1;
                if near_alarm {
                    detected_near_alarm += 1;
                }
            }
        }
        let precision = if detected == 0 {
            0.0
        } else {
            detected_near_alarm as f64 / detected as f64
        };
        let recall = if alarm_windows.is_empty() {
            0.0
        } else {
            let found = alarm_windows
                .iter()
                .filter(|(lo, hi)| {
                    entries[*lo..*hi].iter().any(|&(_, score, nb_max, _)| {
                        score > tau1 && nb_max.map_or(true, |m| !(m < tau2))
                    })
                })
                .count();
            found as f64 / alarm_windows.len() as f64
        };
        SurfaceRow {
            tau1,
            tau2,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    };

    let surface: Vec<SurfaceRow> = tau1_grid
        .par_iter()
        .map(|&tau1| -> Vec<SurfaceRow> {
            tau2_grid
                .iter()
                .map(|&tau2| evaluate_point(tau1, tau2))
                .collect()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    // Strict > in ascending grid order lands on the smallest (τ₁, τ₂) among
    // F1 ties.
    let best = surface
        .iter()
        .fold(None::<SurfaceRow>, |acc, row| match acc {
            Some(cur) if row.f1 <= cur.f1 => Some(cur),
            _ => Some(*row),
        })
        .expect("grids are non-empty");

    let metrics = evaluate_at(
        op_scores,
        sensor_scores,
        alarms,
        best.tau1,
        best.tau2,
        eta_s,
        cfg.delta_s,
    );
    Ok(EvalReport {
        tau1: best.tau1,
        tau2: best.tau2,
        metrics,
        surface,
    })
}

/// Write the F1 surface as CSV (`tau1,tau2,precision,recall,f1`), floats in
/// shortest round-trip form.
pub fn save_surface_csv(path: &Path, surface: &[SurfaceRow]) -> Result<()> {
    let mut out = String::from("tau1,tau2,precision,recall,f1\n");
    for row in surface {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.tau1, row.tau2, row.precision, row.recall, row.f1
        ));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ts(points: &[u64]) -> Vec<Timestamp> {
        points.iter().map(|t| Timestamp(*t)).collect()
    }

    fn alarms(points: &[u64]) -> AlarmLabels {
        AlarmLabels::new(ts(points)).unwrap()
    }

    fn scores(points: &[(u64, f64)]) -> ScoreSeries {
        ScoreSeries::new(points.iter().map(|(t, s)| (Timestamp(*t), *s)).collect()).unwrap()
    }

    #[test]
    fn pairwise_matching_examples() {
        let m = range_precision_recall(&ts(&[100]), &alarms(&[400]), 600);
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
        let m = range_precision_recall(&ts(&[100, 5000]), &alarms(&[400]), 600);
        assert_eq!((m.precision, m.recall), (0.5, 1.0));
        let m = range_precision_recall(&[], &alarms(&[400]), 600);
        assert_eq!((m.precision, m.recall), (0.0, 0.0));
        assert!(m.precision_undefined);
        assert!(!m.recall_undefined);
        let m = range_precision_recall(&ts(&[100]), &alarms(&[]), 600);
        assert!(m.recall_undefined);
    }

    #[test]
    fn tolerance_boundary_is_inclusive() {
        let m = range_precision_recall(&ts(&[1000]), &alarms(&[1600]), 600);
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
        let m = range_precision_recall(&ts(&[1000]), &alarms(&[1601]), 600);
        assert_eq!((m.precision, m.recall), (0.0, 0.0));
    }

    #[test]
    fn f1_matches_harmonic_mean() {
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert_eq!(f1(0.0, 0.5), 0.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
        let v = f1(0.71, 0.84);
        assert!((v - 0.7695483870967742).abs() < 1e-15);
        assert_eq!((v * 100.0).round() / 100.0, 0.77);
    }

    fn brute_force(detected: &[u64], alarm_pts: &[u64], delta: u64) -> (f64, f64) {
        let p = if detected.is_empty() {
            0.0
        } else {
            detected
                .iter()
                .filter(|d| alarm_pts.iter().any(|a| d.abs_diff(*a) <= delta))
                .count() as f64
                / detected.len() as f64
        };
        let r = if alarm_pts.is_empty() {
            0.0
        } else {
            alarm_pts
                .iter()
                .filter(|a| detected.iter().any(|d| d.abs_diff(**a) <= delta))
                .count() as f64
                / alarm_pts.len() as f64
        };
        (p, r)
    }

    fn random_sorted(rng: &mut ChaCha8Rng, max_len: usize, span: u64) -> Vec<u64> {
        let len = rng.gen_range(0..max_len);
        let mut v: Vec<u64> = (0..len).map(|_| rng.gen_range(0..span)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let detected = random_sorted(&mut rng, 30, 5000);
            let alarm_pts = random_sorted(&mut rng, 10, 5000);
            let delta = rng.gen_range(1..800);
            let m = range_precision_recall(&ts(&detected), &alarms(&alarm_pts), delta);
            let (p, r) = brute_force(&detected, &alarm_pts, delta);
            assert_eq!(m.precision, p);
            assert_eq!(m.recall, r);
        }
    }

    #[test]
    fn metrics_are_monotone_in_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let detected = random_sorted(&mut rng, 20, 3000);
            let alarm_pts = random_sorted(&mut rng, 8, 3000);
            if detected.is_empty() || alarm_pts.is_empty() {
                continue;
            }
            let mut last = (0.0, 0.0);
            for delta in [10u64, 100, 500, 1000, 3000] {
                let m = range_precision_recall(&ts(&detected), &alarms(&alarm_pts), delta);
                assert!(m.precision >= last.0 && m.recall >= last.1);
                last = (m.precision, m.recall);
            }
        }
    }

    #[test]
    fn quantile_grid_brackets_the_scores() {
        let s = scores(&[(0, 0.5), (1, 1.5), (2, 0.7), (3, 2.0)]);
        let grid = quantile_grid(&s, 5);
        assert_eq!(grid[0], 0.0);
        assert!(*grid.last().unwrap() > 2.0);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(grid.contains(&0.5) && grid.contains(&2.0));
    }

    #[test]
    fn singleton_grid_equals_single_evaluation() {
        let op = scores(&[(10, 1.0), (40, 3.0), (90, 0.2)]);
        let sens = scores(&[(0, 0.1), (35, 0.9), (80, 0.05)]);
        let labels = alarms(&[45]);
        let cfg = EvalConfig {
            delta_s: 20,
            tau1_grid: Some(vec![2.0]),
            tau2_grid: Some(vec![0.5]),
            ..EvalConfig::default()
        };
        let report = best_f1_sweep(&op, &sens, &labels, &cfg, 14).unwrap();
        assert_eq!(report.surface.len(), 1);
        assert_eq!((report.tau1, report.tau2), (2.0, 0.5));
        let direct = evaluate_at(&op, &sens, &labels, 2.0, 0.5, 14, 20);
        assert_eq!(report.metrics, direct);
        assert_eq!(report.metrics.f1, 1.0);
    }

    fn random_sweep_instance(
        rng: &mut ChaCha8Rng,
    ) -> (ScoreSeries, ScoreSeries, AlarmLabels) {
        let mut t = 0u64;
        let op: Vec<(u64, f64)> = (0..rng.gen_range(5..40))
            .map(|_| {
                t += rng.gen_range(5..25);
                (t, rng.gen_range(0.0..3.0))
            })
            .collect();
        let sens: Vec<(u64, f64)> = (0..=t + 20)
            .map(|u| (u, rng.gen_range(0.0..1.0)))
            .collect();
        let alarm_pts = random_sorted(rng, 6, t + 20);
        (
            scores(&op),
            scores(&sens),
            AlarmLabels::new(ts(&alarm_pts)).unwrap(),
        )
    }

    #[test]
    fn sweep_argmax_matches_brute_force_including_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let (op, sens, labels) = random_sweep_instance(&mut rng);
            let cfg = EvalConfig {
                delta_s: 60,
                grid_points: 12,
                ..EvalConfig::default()
            };
            let report = best_f1_sweep(&op, &sens, &labels, &cfg, 14).unwrap();

            let tau1_grid = quantile_grid(&op, cfg.grid_points);
            let tau2_grid = quantile_grid(&sens, cfg.grid_points);
            let mut best: Option<(f64, f64, f64)> = None;
            for &t1 in &tau1_grid {
                for &t2 in &tau2_grid {
                    let m = evaluate_at(&op, &sens, &labels, t1, t2, 14, cfg.delta_s);
                    let better = match best {
                        None => true,
                        Some((bf1, ..)) => m.f1 > bf1,
                    };
                    if better {
                        best = Some((m.f1, t1, t2));
                    }
                }
            }
            let (bf1, bt1, bt2) = best.unwrap();
            assert_eq!(report.metrics.f1, bf1);
            assert_eq!(report.tau1, bt1, "tie-break on tau1");
            assert_eq!(report.tau2, bt2, "tie-break on tau2");
            assert_eq!(report.surface.len(), tau1_grid.len() * tau2_grid.len());
        }
    }

    #[test]
    fn tau2_zero_row_equals_stage1_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (op, sens, labels) = random_sweep_instance(&mut rng);
        let cfg = EvalConfig {
            delta_s: 60,
            grid_points: 8,
            ..EvalConfig::default()
        };
        let report = best_f1_sweep(&op, &sens, &labels, &cfg, 14).unwrap();
        for row in report.surface.iter().filter(|r| r.tau2 == 0.0) {
            let stage1 = crate::detector::stage1_select(&op, row.tau1);
            let m = range_precision_recall(&stage1.timestamps(), &labels, cfg.delta_s);
            assert_eq!(row.f1, m.f1, "tau1 {}", row.tau1);
        }
    }

    #[test]
    fn reported_metrics_match_independent_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (op, sens, labels) = random_sweep_instance(&mut rng);
        let cfg = EvalConfig {
            delta_s: 120,
            grid_points: 15,
            ..EvalConfig::default()
        };
        let report = best_f1_sweep(&op, &sens, &labels, &cfg, 14).unwrap();
        let again = evaluate_at(
            &op,
            &sens,
            &labels,
            report.tau1,
            report.tau2,
            14,
            cfg.delta_s,
        );
        assert_eq!(report.metrics, again);
    }

    #[test]
    fn surface_csv_round_trips_by_eye() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("surface.csv");
        let rows = vec![SurfaceRow {
            tau1: 0.1,
            tau2: 0.25,
            precision: 1.0 / 3.0,
            recall: 0.5,
            f1: f1(1.0 / 3.0, 0.5),
        }];
        save_surface_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "tau1,tau2,precision,recall,f1");
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.1);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn config_validation_rejects_bad_grids() {
        let mut cfg = EvalConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.tau1_grid = Some(vec![]);
        assert!(cfg.validate().is_err());
        cfg.tau1_grid = Some(vec![0.5, 0.5]);
        assert!(cfg.validate().is_err());
        cfg.tau1_grid = Some(vec![0.5, 0.2]);
        assert!(cfg.validate().is_err());
        cfg.tau1_grid = Some(vec![0.2, 0.5]);
        assert!(cfg.validate().is_ok());
        cfg.delta_s = 0;
        assert!(cfg.validate().is_err());
    }
}
