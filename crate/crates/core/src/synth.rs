//! Seeded synthetic assembly-line data generator.
//!
//! Produces one day (by default) of heterogeneous signals shaped like the
//! real thing: operation-cycle rows every 13–15 s with downtime gaps, smooth
//! autocorrelated 1 Hz sensor channels, a few exactly-constant columns for
//! the preprocessor to drop, and sparse missing cells for it to impute.
//!
//! Normal rows in both families are linear mixes of a handful of shared
//! latent drivers plus noise, so they live on a low-dimensional manifold a
//! small reconstruction model can learn. Planted events push rows off that
//! manifold. Three kinds are planted, all pairwise separated by more than
//! twice the matching tolerance so that evaluation is unambiguous:
//!
//! * **type A** — a cycle-level disturbance corroborated by a sensor bump
//!   and recorded as a true alarm label; detectors should find these;
//! * **type B** — a cycle-level disturbance with *no* sensor trace and no
//!   label; these are the designed false positives that corroboration
//!   filtering exists to remove;
//! * **sensor distractors** — sensor-only bumps with no cycle disturbance
//!   and no label; they punish detectors that trust sensors alone.
//!
//! Everything is a pure function of the seed, and a manifest records the
//! ground truth for test assertions.

use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::timeseries::{
    AlarmLabels, HeterogeneousDataset, OperationCycleSeries, SensorSeries, Timestamp,
};

/// Latent drivers behind the operation-cycle features; fewer than the
/// reconstruction bottleneck so the normal manifold is learnable.
const OP_DRIVERS: usize = 4;
/// Latent drivers behind the sensor channels.
const SENSOR_DRIVERS: usize = 3;

/// Planted event counts and morphology.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySpec {
    /// Labeled anomalies visible in both signal families.
    pub type_a: usize,
    /// Unlabeled cycle-only disturbances (designed false positives).
    pub type_b: usize,
    /// Unlabeled sensor-only bumps.
    pub sensor_distractors: usize,
    /// How many features each event perturbs.
    pub features_hit: usize,
    /// Base perturbation size in multiples of the relevant noise scale;
    /// large enough to clear the reconstruction-error floor, small enough
    /// that thresholds still matter.
    pub magnitude_noise_sd: f64,
    /// Half-width of the sensor bump around an event, in seconds.
    pub sensor_halfwidth_s: u64,
    /// Per-event uniform multiplier range on type-A bump sizes (both
    /// families).
    pub type_a_scale: (f64, f64),
    /// Multiplier range for type-B cycle disturbances. Stronger than type-A
    /// by default, so no cycle-score threshold can admit every labeled
    /// event while rejecting the unlabeled ones.
    pub type_b_scale: (f64, f64),
    /// Multiplier range for distractor sensor bumps. Stronger than type-A
    /// by default, so no sensor-score (or concatenated-score) threshold can
    /// rank every labeled event above the distractors.
    pub distractor_scale: (f64, f64),
}

impl Default for AnomalySpec {
    fn default() -> Self {
        AnomalySpec {
            type_a: 10,
            type_b: 8,
            sensor_distractors: 12,
            features_hit: 3,
            magnitude_noise_sd: 10.0,
            sensor_halfwidth_s: 5,
            type_a_scale: (0.9, 1.1),
            type_b_scale: (1.4, 1.8),
            distractor_scale: (1.4, 1.8),
        }
    }
}

/// Downtime layout: fixed planned windows plus a seeded chance of one long
/// unplanned outage. No operation cycles occur inside downtime.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DowntimeSpec {
    /// Planned (offset-from-midnight, length) windows, repeated daily.
    pub planned: Vec<(u64, u64)>,
    /// Probability per day of one unplanned outage.
    pub unplanned_per_day: f64,
    /// Length range (inclusive) of an unplanned outage, seconds.
    pub unplanned_len_s: (u64, u64),
}

impl Default for DowntimeSpec {
    fn default() -> Self {
        DowntimeSpec {
            planned: vec![(21_600, 900), (64_800, 900)],
            unplanned_per_day: 0.5,
            unplanned_len_s: (1_800, 3_600),
        }
    }
}

/// Full generator configuration. The defaults produce the benchmark
/// dataset: one day at 1 Hz, 22 informative operation-cycle features + 2
/// constant ones, 7 informative sensor channels + 1 constant one, and 30
/// planted events (10 type-A, 8 type-B, 12 distractors) in the second half
/// of the day.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Total span in seconds; sensor rows cover [0, duration_s).
    pub duration_s: u64,
    /// Inclusive range of seconds between consecutive operation cycles.
    pub cycle_len_s: (u64, u64),
    /// Informative operation-cycle feature count.
    pub d_o: usize,
    /// Informative sensor channel count.
    pub d_s: usize,
    /// Exactly-constant operation-cycle columns appended after the
    /// informative ones (preprocessing is expected to drop them).
    pub static_op: usize,
    /// Exactly-constant sensor columns appended after the informative ones.
    pub static_sensor: usize,
    /// Standard deviation of the per-row operation-cycle noise.
    pub op_noise_sd: f64,
    /// Standard deviation of the sensor latent AR(1) innovations.
    pub sensor_noise_sd: f64,
    /// AR(1) coefficient of the sensor drivers; close to 1 gives the
    /// temporal continuity real sensors show.
    pub sensor_ar: f64,
    /// Fraction of the span used for training; events are planted strictly
    /// after the boundary, so the training region is clean.
    pub boundary_fraction: f64,
    /// Probability of a missing cell in operation-cycle rows (never the
    /// first row, never an event row).
    pub missing_rate_op: f64,
    /// Probability of a missing cell in sensor rows (never the first row,
    /// never inside a bump).
    pub missing_rate_sensor: f64,
    /// Matching tolerance the dataset is built for; events are spaced more
    /// than 2·delta_s apart.
    pub delta_s: u64,
    pub downtime: DowntimeSpec,
    pub anomalies: AnomalySpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            duration_s: 86_400,
            cycle_len_s: (13, 15),
            d_o: 22,
            d_s: 7,
            static_op: 2,
            static_sensor: 1,
            op_noise_sd: 0.05,
            sensor_noise_sd: 0.05,
            sensor_ar: 0.97,
            boundary_fraction: 0.5,
            missing_rate_op: 0.002,
            missing_rate_sensor: 0.001,
            delta_s: 600,
            downtime: DowntimeSpec::default(),
            anomalies: AnomalySpec::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_s < 600 {
            return Err(Error::Config("duration_s must be at least 600".into()));
        }
        let (lo, hi) = self.cycle_len_s;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "cycle_len_s range ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
        if self.d_o == 0 || self.d_s == 0 {
            return Err(Error::Config("d_o and d_s must be positive".into()));
        }
        if self.anomalies.features_hit == 0
            || self.anomalies.features_hit > self.d_o.min(self.d_s)
        {
            return Err(Error::Config(
                "features_hit must be in 1..=min(d_o, d_s)".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("type_a_scale", self.anomalies.type_a_scale),
            ("type_b_scale", self.anomalies.type_b_scale),
            ("distractor_scale", self.anomalies.distractor_scale),
        ] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} ({lo}, {hi}) must satisfy 0 < lo <= hi"
                )));
            }
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return Err(Error::Config("boundary_fraction must be in (0, 1)".into()));
        }
        if !(self.sensor_ar > 0.0 && self.sensor_ar < 1.0) {
            return Err(Error::Config("sensor_ar must be in (0, 1)".into()));
        }
        for (name, rate) in [
            ("missing_rate_op", self.missing_rate_op),
            ("missing_rate_sensor", self.missing_rate_sensor),
        ] {
            if !(0.0..0.5).contains(&rate) {
                return Err(Error::Config(format!("{name} must be in [0, 0.5)")));
            }
        }
        if self.delta_s == 0 {
            return Err(Error::Config("delta_s must be positive".into()));
        }
        if !self.op_noise_sd.is_finite() || self.op_noise_sd <= 0.0 {
            return Err(Error::Config("op_noise_sd must be > 0".into()));
        }
        if !self.sensor_noise_sd.is_finite() || self.sensor_noise_sd <= 0.0 {
            return Err(Error::Config("sensor_noise_sd must be > 0".into()));
        }
        Ok(())
    }

    /// Suggested train/test boundary timestamp.
    pub fn boundary(&self) -> Timestamp {
        Timestamp((self.duration_s as f64 * self.boundary_fraction) as u64)
    }
}

/// What was planted where.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TypeA,
    TypeB,
    SensorDistractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub timestamp: Timestamp,
    pub kind: EventKind,
}

/// Ground truth for a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    /// Suggested chronological split point (events lie strictly after it).
    pub boundary_s: u64,
    /// All planted events, sorted by time.
    pub events: Vec<SynthEvent>,
    /// Names of the exactly-constant columns, per family.
    pub static_op_features: Vec<String>,
    pub static_sensor_features: Vec<String>,
    /// Downtime intervals as [start, end) pairs.
    pub downtime: Vec<(u64, u64)>,
}

impl SynthManifest {
    pub fn timestamps_of(&self, kind: EventKind) -> Vec<Timestamp> {
        self.events
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.timestamp)
            .collect()
    }
}

fn in_any(intervals: &[(u64, u64)], t: u64) -> bool {
    intervals.iter().any(|&(s, e)| t >= s && t < e)
}

/// Generate a dataset and its ground-truth manifest. Identical configs
/// produce bit-identical output.
pub fn generate(cfg: &SynthConfig) -> Result<(HeterogeneousDataset, SynthManifest)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let op_noise = Normal::new(0.0, cfg.op_noise_sd).expect("validated sd");
    let driver_noise = Normal::new(0.0, cfg.sensor_noise_sd).expect("validated sd");
    // Per-channel noise on top of the shared drivers keeps sensor channels
    // from being exact linear copies of each other.
    let channel_noise = Normal::new(0.0, cfg.sensor_noise_sd * 0.2).expect("validated sd");

    // --- downtime ------------------------------------------------------
    let mut downtime: Vec<(u64, u64)> = Vec::new();
    let days = cfg.duration_s.div_ceil(86_400);
    for day in 0..days {
        for &(offset, len) in &cfg.downtime.planned {
            let start = day * 86_400 + offset;
            if start < cfg.duration_s {
                downtime.push((start, (start + len).min(cfg.duration_s)));
            }
        }
        if rng.gen_bool(cfg.downtime.unplanned_per_day.clamp(0.0, 1.0)) {
            let (lo, hi) = cfg.downtime.unplanned_len_s;
            let len = rng.gen_range(lo..=hi.max(lo));
            let start = day * 86_400 + rng.gen_range(0..86_400u64.saturating_sub(len).max(1));
            if start < cfg.duration_s {
                downtime.push((start, (start + len).min(cfg.duration_s)));
            }
        }
    }
    downtime.sort_unstable();

    // --- operation-cycle timestamps -------------------------------------
    let (gap_lo, gap_hi) = cfg.cycle_len_s;
    let mut op_times: Vec<u64> = Vec::new();
    let mut t = rng.gen_range(gap_lo..=gap_hi);
    while t < cfg.duration_s {
        if let Some(&(_, end)) = downtime.iter().find(|&&(s, e)| t >= s && t < e) {
            t = end + rng.gen_range(gap_lo..=gap_hi);
            continue;
        }
        op_times.push(t);
        t += rng.gen_range(gap_lo..=gap_hi);
    }
    if op_times.len() < 10 {
        return Err(Error::Config(
            "span too short or downtime too dense: almost no operation cycles".into(),
        ));
    }

    // --- event placement -------------------------------------------------
    // Every event is pinned to an operation-cycle row in the test region:
    // cycle-level events need a row to disturb, and pinning distractors the
    // same way keeps them out of downtime with no extra bookkeeping (the
    // sensor bump is the only thing a distractor actually adds).
    let n_events =
        cfg.anomalies.type_a + cfg.anomalies.type_b + cfg.anomalies.sensor_distractors;
    let margin = cfg.delta_s + 60;
    let region_lo = cfg.boundary().0 + margin;
    let region_hi = cfg.duration_s.saturating_sub(margin);
    let spacing = 2 * cfg.delta_s + 1;
    let region_len = region_hi.saturating_sub(region_lo);
    if n_events > 0 && (n_events as u64 - 1).saturating_mul(spacing) + 1 > region_len {
        return Err(Error::Config(format!(
            "cannot fit {n_events} events more than {} s apart into a {region_len} s test \
             region; reduce counts or delta_s",
            2 * cfg.delta_s
        )));
    }
    let mut kinds: Vec<EventKind> = Vec::with_capacity(n_events);
    kinds.extend(std::iter::repeat(EventKind::TypeA).take(cfg.anomalies.type_a));
    kinds.extend(std::iter::repeat(EventKind::TypeB).take(cfg.anomalies.type_b));
    kinds.extend(
        std::iter::repeat(EventKind::SensorDistractor).take(cfg.anomalies.sensor_distractors),
    );
    kinds.shuffle(&mut rng);
    // Greedy earliest-fit with jitter: walk a cursor through the region,
    // spend a random share of the remaining slack before each event, then
    // pin the event to the first cycle row at or past the cursor.
    // Separation > 2*delta_s holds by construction. The jitter only spreads
    // events out, so the final zero-jitter pass is also a feasibility
    // proof: if it fails, no placement exists.
    const PLACEMENT_ATTEMPTS: usize = 50;
    let mut placed: Vec<(u64, EventKind)> = Vec::with_capacity(n_events);
    'attempt: for attempt in 0..PLACEMENT_ATTEMPTS {
        placed.clear();
        let mut cursor = region_lo;
        for (i, &kind) in kinds.iter().enumerate() {
            let remaining = (n_events - i) as u64;
            let tail = (remaining - 1) * spacing;
            let budget = region_hi.saturating_sub(cursor).saturating_sub(tail + 1);
            if attempt + 1 < PLACEMENT_ATTEMPTS && budget > 0 {
                cursor += rng.gen_range(0..=budget / remaining);
            }
            let idx = op_times.partition_point(|&u| u < cursor);
            match op_times.get(idx) {
                Some(&u) if u + tail < region_hi => {
                    placed.push((u, kind));
                    cursor = u + spacing;
                }
                _ => continue 'attempt,
            }
        }
        break;
    }
    if placed.len() != n_events {
        return Err(Error::Config(format!(
            "could not place {n_events} events more than {} s apart around the downtime \
             layout; reduce counts or delta_s",
            2 * cfg.delta_s
        )));
    }
    let events: Vec<SynthEvent> = placed
        .iter()
        .map(|&(t, kind)| SynthEvent {
            timestamp: Timestamp(t),
            kind,
        })
        .collect();
    let op_row_of: HashMap<u64, usize> = op_times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();

    // --- operation-cycle values -----------------------------------------
    // Each informative feature is a fixed linear mix of a few smooth latent
    // drivers plus white noise; normal rows therefore live on a manifold of
    // dimension OP_DRIVERS.
    let d_o_total = cfg.d_o + cfg.static_op;
    let op_names: Vec<String> = (0..d_o_total).map(|i| format!("op{i:02}")).collect();
    // Driver periods are short against the training span so the training
    // rows cover the joint driver manifold; combinations first seen in the
    // test region would otherwise raise the reconstruction-error floor.
    let op_drivers: Vec<(f64, f64, f64)> = (0..OP_DRIVERS)
        .map(|_| {
            (
                rng.gen_range(0.25..0.45),
                rng.gen_range(3_600.0..14_400.0),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    let op_mix: Vec<Vec<f64>> = (0..cfg.d_o)
        .map(|_| (0..OP_DRIVERS).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let op_level: Vec<f64> = (0..cfg.d_o).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let static_op_values: Vec<f64> = (0..cfg.static_op)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let mut op_values = Matrix::zeros(op_times.len(), d_o_total);
    for (i, &t) in op_times.iter().enumerate() {
        let drivers: Vec<f64> = op_drivers
            .iter()
            .map(|&(amp, period, phase)| amp * (TAU * t as f64 / period + phase).sin())
            .collect();
        for f in 0..cfg.d_o {
            let mixed: f64 = op_mix[f].iter().zip(&drivers).map(|(m, d)| m * d).sum();
            op_values.set(i, f, op_level[f] + mixed + op_noise.sample(&mut rng));
        }
        for (s, &v) in static_op_values.iter().enumerate() {
            op_values.set(i, cfg.d_o + s, v);
        }
    }
    // Cycle-level disturbances: type A and type B alike knock a few random
    // informative features off the manifold on the event row, each event
    // drawing its own strength from its kind's multiplier range.
    let op_magnitude = cfg.anomalies.magnitude_noise_sd * cfg.op_noise_sd;
    for &(t, kind) in &placed {
        let (lo, hi) = match kind {
            EventKind::TypeA => cfg.anomalies.type_a_scale,
            EventKind::TypeB => cfg.anomalies.type_b_scale,
            EventKind::SensorDistractor => continue,
        };
        let scale = rng.gen_range(lo..=hi);
        let row = op_row_of[&t];
        let hit = rand::seq::index::sample(&mut rng, cfg.d_o, cfg.anomalies.features_hit);
        for f in hit {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            op_values.set(row, f, op_values.get(row, f) + sign * scale * op_magnitude);
        }
    }

    // --- sensor values ----------------------------------------------------
    // Channels mix a few shared drivers, each a slow sinusoid plus an AR(1)
    // component, so they are smooth, strongly autocorrelated, and jointly
    // low-rank.
    let d_s_total = cfg.d_s + cfg.static_sensor;
    let sensor_names: Vec<String> = (0..d_s_total).map(|i| format!("s{i}")).collect();
    let sensor_drivers: Vec<(f64, f64, f64)> = (0..SENSOR_DRIVERS)
        .map(|_| {
            (
                rng.gen_range(0.25..0.45),
                rng.gen_range(3_600.0..10_800.0),
                rng.gen_range(0.0..TAU),
            )
        })
        .collect();
    let sensor_mix: Vec<Vec<f64>> = (0..cfg.d_s)
        .map(|_| {
            (0..SENSOR_DRIVERS)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let sensor_level: Vec<f64> = (0..cfg.d_s).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let static_sensor_values: Vec<f64> = (0..cfg.static_sensor)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let rows = cfg.duration_s as usize;
    let mut sensor_values = Matrix::zeros(rows, d_s_total);
    let mut ar_state = vec![0.0f64; SENSOR_DRIVERS];
    for t in 0..rows {
        let drivers: Vec<f64> = sensor_drivers
            .iter()
            .enumerate()
            .map(|(j, &(amp, period, phase))| {
                ar_state[j] = cfg.sensor_ar * ar_state[j] + driver_noise.sample(&mut rng);
                amp * (TAU * t as f64 / period + phase).sin() + ar_state[j]
            })
            .collect();
        for f in 0..cfg.d_s {
            let mixed: f64 = sensor_mix[f].iter().zip(&drivers).map(|(m, d)| m * d).sum();
            sensor_values.set(t, f, sensor_level[f] + mixed + channel_noise.sample(&mut rng));
        }
        for (s, &v) in static_sensor_values.iter().enumerate() {
            sensor_values.set(t, cfg.d_s + s, v);
        }
    }
    // Sensor bumps: triangular pulses at type-A events and distractors,
    // scaled against the stationary spread of one AR driver.
    let stationary_sd = cfg.sensor_noise_sd / (1.0 - cfg.sensor_ar * cfg.sensor_ar).sqrt();
    let sensor_magnitude = cfg.anomalies.magnitude_noise_sd * stationary_sd;
    let half = cfg.anomalies.sensor_halfwidth_s;
    let mut bump_rows: Vec<(u64, u64)> = Vec::new();
    for &(t, kind) in &placed {
        let (lo, hi) = match kind {
            EventKind::TypeA => cfg.anomalies.type_a_scale,
            EventKind::TypeB => continue,
            EventKind::SensorDistractor => cfg.anomalies.distractor_scale,
        };
        let scale = rng.gen_range(lo..=hi);
        bump_rows.push((t.saturating_sub(half), t + half + 1));
        let hit = rand::seq::index::sample(&mut rng, cfg.d_s, cfg.anomalies.features_hit);
        for f in hit {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for k in t.saturating_sub(half)..=(t + half).min(cfg.duration_s - 1) {
                let pulse = scale
                    * sensor_magnitude
                    * (1.0 - k.abs_diff(t) as f64 / (half as f64 + 1.0));
                let row = k as usize;
                sensor_values.set(row, f, sensor_values.get(row, f) + sign * pulse);
            }
        }
    }

    // --- missing cells ----------------------------------------------------
    // Event rows and bump rows stay complete so imputation artefacts never
    // blur the planted ground truth.
    let event_rows: HashSet<usize> = placed.iter().map(|&(t, _)| op_row_of[&t]).collect();
    if cfg.missing_rate_op > 0.0 {
        for i in 1..op_times.len() {
            if event_rows.contains(&i) {
                continue;
            }
            for f in 0..d_o_total {
                if rng.gen_bool(cfg.missing_rate_op) {
                    op_values.set(i, f, f64::NAN);
                }
            }
        }
    }
    if cfg.missing_rate_sensor > 0.0 {
        for t in 1..rows {
            if in_any(&bump_rows, t as u64) {
                continue;
            }
            for f in 0..d_s_total {
                if rng.gen_bool(cfg.missing_rate_sensor) {
                    sensor_values.set(t, f, f64::NAN);
                }
            }
        }
    }

    // --- assembly ----------------------------------------------------------
    let opcycle = OperationCycleSeries::new(
        op_times.iter().map(|&t| Timestamp(t)).collect(),
        op_names.clone(),
        op_values,
    )?;
    let sensor = SensorSeries::new(Timestamp(0), sensor_names.clone(), sensor_values)?;
    let labels = AlarmLabels::new(
        placed
            .iter()
            .filter(|(_, k)| *k == EventKind::TypeA)
            .map(|&(t, _)| Timestamp(t))
            .collect(),
    )?;
    let dataset = HeterogeneousDataset::new(opcycle, sensor, Some(labels))?;
    let manifest = SynthManifest {
        seed: cfg.seed,
        boundary_s: cfg.boundary().0,
        events,
        static_op_features: op_names[cfg.d_o..].to_vec(),
        static_sensor_features: sensor_names[cfg.d_s..].to_vec(),
        downtime,
    };
    Ok((dataset, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::FeatureSeries;

    fn small_config(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            duration_s: 20_000,
            delta_s: 120,
            anomalies: AnomalySpec {
                type_a: 4,
                type_b: 4,
                sensor_distractors: 4,
                ..AnomalySpec::default()
            },
            downtime: DowntimeSpec {
                planned: vec![(2_000, 300)],
                unplanned_per_day: 0.3,
                unplanned_len_s: (600, 900),
            },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = small_config(7);
        let (a, ma) = generate(&cfg).unwrap();
        let (b, mb) = generate(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&ma).unwrap(),
            serde_json::to_string(&mb).unwrap()
        );
        assert_eq!(a.opcycle.timestamps(), b.opcycle.timestamps());
        let (av, bv) = (a.opcycle.values(), b.opcycle.values());
        assert!(av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let (av, bv) = (a.sensor.values(), b.sensor.values());
        assert!(av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn labels_are_exactly_the_type_a_events() {
        let (data, manifest) = generate(&small_config(1)).unwrap();
        let labels = data.labels.as_ref().unwrap().points().to_vec();
        assert_eq!(labels, manifest.timestamps_of(EventKind::TypeA));
        for b in manifest.timestamps_of(EventKind::TypeB) {
            assert!(!labels.contains(&b));
        }
        assert_eq!(labels.len(), 4);
    }

    #[test]
    fn cycle_gaps_stay_in_range_outside_downtime() {
        let cfg = small_config(2);
        let (data, manifest) = generate(&cfg).unwrap();
        let times = data.opcycle.timestamps();
        for w in times.windows(2) {
            let gap = w[1].0 - w[0].0;
            let crosses_downtime = manifest
                .downtime
                .iter()
                .any(|&(s, e)| w[0].0 < e && w[1].0 >= s);
            if !crosses_downtime {
                assert!(
                    (cfg.cycle_len_s.0..=cfg.cycle_len_s.1).contains(&gap),
                    "gap {gap} at {}",
                    w[0]
                );
            }
        }
    }

    #[test]
    fn no_cycles_inside_downtime() {
        let (data, manifest) = generate(&small_config(3)).unwrap();
        for t in data.opcycle.timestamps() {
            assert!(!in_any(&manifest.downtime, t.0), "cycle at {t} in downtime");
        }
    }

    #[test]
    fn events_sit_on_cycle_rows_well_separated_in_test_region() {
        let cfg = small_config(4);
        let (data, manifest) = generate(&cfg).unwrap();
        let times: Vec<u64> = manifest.events.iter().map(|e| e.timestamp.0).collect();
        assert_eq!(times.len(), 12);
        for pair in times.windows(2) {
            assert!(pair[1] - pair[0] > 2 * cfg.delta_s);
        }
        let rows = data.opcycle.timestamps();
        for &t in &times {
            assert!(t > manifest.boundary_s + cfg.delta_s);
            assert!(t < cfg.duration_s - cfg.delta_s);
            assert!(rows.binary_search(&Timestamp(t)).is_ok());
        }
    }

    #[test]
    fn sensor_channels_are_strongly_autocorrelated() {
        let (data, _) = generate(&small_config(5)).unwrap();
        let values = data.sensor.values();
        for f in 0..7 {
            let col: Vec<f64> = values.column(f).filter(|v| v.is_finite()).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let cov = col
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>()
                / (n - 1.0);
            assert!(cov / var > 0.9, "channel {f}: lag-1 autocorr {}", cov / var);
        }
    }

    #[test]
    fn static_columns_are_exactly_constant() {
        let (data, manifest) = generate(&small_config(6)).unwrap();
        assert_eq!(manifest.static_op_features, vec!["op22", "op23"]);
        assert_eq!(manifest.static_sensor_features, vec!["s7"]);
        for name in &manifest.static_op_features {
            let idx = data
                .opcycle
                .feature_names()
                .iter()
                .position(|n| n == name)
                .unwrap();
            let col: Vec<f64> = data.opcycle.values().column(idx).collect();
            let first = col[0];
            assert!(col.iter().all(|&v| v == first || v.is_nan()));
        }
    }

    #[test]
    fn missing_cells_appear_but_first_rows_are_complete() {
        let (data, _) = generate(&small_config(8)).unwrap();
        assert!(data.opcycle.missing_cells() > 0);
        assert!(data.sensor.missing_cells() > 0);
        assert!(data.opcycle.values().row(0).iter().all(|v| v.is_finite()));
        assert!(data.sensor.values().row(0).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_anomalies_yield_empty_labels() {
        let mut cfg = small_config(9);
        cfg.anomalies.type_a = 0;
        cfg.anomalies.type_b = 0;
        cfg.anomalies.sensor_distractors = 0;
        let (data, manifest) = generate(&cfg).unwrap();
        assert!(data.labels.as_ref().unwrap().points().is_empty());
        assert!(manifest.events.is_empty());
    }

    #[test]
    fn infeasible_spacing_is_a_config_error() {
        let mut cfg = small_config(10);
        cfg.anomalies.type_a = 500;
        match generate(&cfg) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn default_config_is_feasible_and_full_day() {
        for seed in 0..5 {
            let cfg = SynthConfig { seed, ..SynthConfig::default() };
            let (data, manifest) = generate(&cfg).unwrap();
            assert_eq!(data.sensor.len(), 86_400);
            assert_eq!(data.opcycle.feature_count(), 24);
            assert_eq!(data.sensor.feature_count(), 8);
            assert_eq!(manifest.timestamps_of(EventKind::TypeA).len(), 10);
            assert_eq!(manifest.timestamps_of(EventKind::TypeB).len(), 8);
            assert_eq!(manifest.timestamps_of(EventKind::SensorDistractor).len(), 12);
            // Roughly one cycle every 14 s outside downtime.
            assert!(data.opcycle.len() > 4_000);
        }
    }
}
