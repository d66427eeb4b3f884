//! Core data model: timestamps, the two signal families, alarm labels,
//! per-timestamp anomaly scores, and CSV interchange for all of them.
//!
//! Conventions shared by every CSV file:
//! * UTF-8 with a mandatory header row,
//! * first column named `timestamp` holding non-negative integer seconds,
//! * timestamps strictly increasing from top to bottom,
//! * an empty value cell (or an explicit `NaN`) means "missing".

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default file names used by the generator and the CLI run directories.
pub const SENSOR_CSV: &str = "sensor.csv";
pub const OPCYCLE_CSV: &str = "opcycle.csv";
pub const LABELS_CSV: &str = "labels.csv";

/// Hard cap on the reconstructed 1 Hz span (~3 years). Loading an
/// accidentally sparse file as sensor data fails loudly instead of
/// allocating an absurd table.
const MAX_SENSOR_SPAN_S: u64 = 100_000_000;

/// A point in time, in whole seconds from an arbitrary epoch.
#[derive(
    Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn seconds(self) -> u64 {
        self.0
    }

    /// |self - other| in seconds.
    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    /// Shift forward by `s` seconds.
    pub fn plus(self, s: u64) -> Timestamp {
        Timestamp(self.0 + s)
    }

    /// Shift backward by `s` seconds, clamping at zero.
    pub fn minus_clamped(self, s: u64) -> Timestamp {
        Timestamp(self.0.saturating_sub(s))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Validated list of feature names: non-empty, unique, and none of them
/// colliding with the reserved `timestamp` column.
fn validate_feature_names(names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::Validation("a series needs at least one feature".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for name in names {
        if name.is_empty() {
            return Err(Error::Validation("empty feature name".into()));
        }
        if name == "timestamp" {
            return Err(Error::Validation(
                "'timestamp' is reserved for the time column".into(),
            ));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Validation(format!("duplicate feature name '{name}'")));
        }
    }
    Ok(())
}

/// Common access to "a named feature table over time", implemented by both
/// signal families so preprocessing can treat them uniformly.
pub trait FeatureSeries: Sized {
    /// Feature names, in column order.
    fn feature_names(&self) -> &[String];
    /// One row per observation, one column per feature. Missing cells are NaN.
    fn values(&self) -> &Matrix;
    /// Timestamp of row `i`.
    fn timestamp_at(&self, i: usize) -> Timestamp;
    /// Rebuild the series with the same time base but new columns/values.
    fn with_columns(&self, names: Vec<String>, values: Matrix) -> Result<Self>;
    /// Rebuild keeping only the rows in `range` (contiguous, preserving order).
    fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self>;

    fn len(&self) -> usize {
        self.values().rows()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn feature_count(&self) -> usize {
        self.values().cols()
    }
}

/// Regularly sampled signals at 1 Hz: row `i` is the observation at
/// `start + i` seconds. Gaps in the source file become all-NaN rows so the
/// time base stays dense.
#[derive(Debug, Clone)]
pub struct SensorSeries {
    start: Timestamp,
    names: Vec<String>,
    values: Matrix,
}

impl SensorSeries {
    pub fn new(start: Timestamp, names: Vec<String>, values: Matrix) -> Result<Self> {
        validate_feature_names(&names)?;
        if names.len() != values.cols() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                actual: values.cols(),
                context: "sensor feature names vs value columns".into(),
            });
        }
        if values.rows() == 0 {
            return Err(Error::Validation("sensor series has no rows".into()));
        }
        Ok(SensorSeries {
            start,
            names,
            values,
        })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    /// Timestamp of the last row (inclusive).
    pub fn end(&self) -> Timestamp {
        Timestamp(self.start.0 + (self.values.rows() as u64 - 1))
    }

    /// Row index for a timestamp inside the span, if any.
    pub fn row_index(&self, t: Timestamp) -> Option<usize> {
        if t < self.start || t > self.end() {
            None
        } else {
            Some((t.0 - self.start.0) as usize)
        }
    }

    /// Number of missing (NaN) cells.
    pub fn missing_cells(&self) -> usize {
        self.values.as_slice().iter().filter(|v| v.is_nan()).count()
    }
}

impl FeatureSeries for SensorSeries {
    fn feature_names(&self) -> &[String] {
        &self.names
    }

    fn values(&self) -> &Matrix {
        &self.values
    }

    fn timestamp_at(&self, i: usize) -> Timestamp {
        Timestamp(self.start.0 + i as u64)
    }

    fn with_columns(&self, names: Vec<String>, values: Matrix) -> Result<Self> {
        if values.rows() != self.values.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.values.rows(),
                actual: values.rows(),
                context: "sensor row count must be preserved".into(),
            });
        }
        SensorSeries::new(self.start, names, values)
    }

    fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.values.rows() || range.is_empty() {
            return Err(Error::Validation(format!(
                "row range {range:?} out of bounds for sensor series of length {}",
                self.values.rows()
            )));
        }
        SensorSeries::new(
            Timestamp(self.start.0 + range.start as u64),
            self.names.clone(),
            self.values.row_range(range),
        )
    }
}

/// Irregularly sampled signals: one row per completed operation cycle,
/// with an explicit, strictly increasing timestamp per row.
#[derive(Debug, Clone)]
pub struct OperationCycleSeries {
    timestamps: Vec<Timestamp>,
    names: Vec<String>,
    values: Matrix,
}

impl OperationCycleSeries {
    pub fn new(timestamps: Vec<Timestamp>, names: Vec<String>, values: Matrix) -> Result<Self> {
        validate_feature_names(&names)?;
        if names.len() != values.cols() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                actual: values.cols(),
                context: "operation-cycle feature names vs value columns".into(),
            });
        }
        if timestamps.len() != values.rows() {
            return Err(Error::DimensionMismatch {
                expected: timestamps.len(),
                actual: values.rows(),
                context: "operation-cycle timestamps vs value rows".into(),
            });
        }
        if timestamps.is_empty() {
            return Err(Error::Validation("operation-cycle series has no rows".into()));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "operation-cycle timestamps must be strictly increasing".into(),
            ));
        }
        Ok(OperationCycleSeries {
            timestamps,
            names,
            values,
        })
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn first(&self) -> Timestamp {
        self.timestamps[0]
    }

    pub fn last(&self) -> Timestamp {
        *self.timestamps.last().expect("non-empty by construction")
    }

    /// Number of missing (NaN) cells.
    pub fn missing_cells(&self) -> usize {
        self.values.as_slice().iter().filter(|v| v.is_nan()).count()
    }
}

impl FeatureSeries for OperationCycleSeries {
    fn feature_names(&self) -> &[String] {
        &self.names
    }

    fn values(&self) -> &Matrix {
        &self.values
    }

    fn timestamp_at(&self, i: usize) -> Timestamp {
        self.timestamps[i]
    }

    fn with_columns(&self, names: Vec<String>, values: Matrix) -> Result<Self> {
        if values.rows() != self.values.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.values.rows(),
                actual: values.rows(),
                context: "operation-cycle row count must be preserved".into(),
            });
        }
        OperationCycleSeries::new(self.timestamps.clone(), names, values)
    }

    fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.values.rows() || range.is_empty() {
            return Err(Error::Validation(format!(
                "row range {range:?} out of bounds for operation-cycle series of length {}",
                self.values.rows()
            )));
        }
        OperationCycleSeries::new(
            self.timestamps[range.clone()].to_vec(),
            self.names.clone(),
            self.values.row_range(range),
        )
    }
}

/// Ground-truth alarm instants, strictly increasing. May be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlarmLabels {
    points: Vec<Timestamp>,
}

impl AlarmLabels {
    pub fn new(points: Vec<Timestamp>) -> Result<Self> {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "alarm timestamps must be strictly increasing".into(),
            ));
        }
        Ok(AlarmLabels { points })
    }

    pub fn points(&self) -> &[Timestamp] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One monitored process: cycle-level signals, 1 Hz sensor signals and,
/// optionally, alarm labels. The sensor span must cover every cycle row and
/// every label.
#[derive(Debug, Clone)]
pub struct HeterogeneousDataset {
    pub opcycle: OperationCycleSeries,
    pub sensor: SensorSeries,
    pub labels: Option<AlarmLabels>,
}

impl HeterogeneousDataset {
    pub fn new(
        opcycle: OperationCycleSeries,
        sensor: SensorSeries,
        labels: Option<AlarmLabels>,
    ) -> Result<Self> {
        let (lo, hi) = (sensor.start(), sensor.end());
        if opcycle.first() < lo || opcycle.last() > hi {
            return Err(Error::Validation(format!(
                "operation-cycle rows [{}, {}] leave the sensor span [{lo}, {hi}]",
                opcycle.first(),
                opcycle.last()
            )));
        }
        if let Some(labels) = &labels {
            if let (Some(first), Some(last)) = (labels.points().first(), labels.points().last()) {
                if *first < lo || *last > hi {
                    return Err(Error::Validation(format!(
                        "alarm labels [{first}, {last}] leave the sensor span [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(HeterogeneousDataset {
            opcycle,
            sensor,
            labels,
        })
    }

    /// Inclusive time span covered by the dataset.
    pub fn span(&self) -> (Timestamp, Timestamp) {
        (self.sensor.start(), self.sensor.end())
    }
}

/// Per-timestamp anomaly scores, strictly increasing in time. Scores are
/// finite and non-negative (they are reconstruction-error norms).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    entries: Vec<(Timestamp, f64)>,
}

impl ScoreSeries {
    pub fn new(entries: Vec<(Timestamp, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Validation(
                "score timestamps must be strictly increasing".into(),
            ));
        }
        if let Some((t, s)) = entries.iter().find(|(_, s)| !s.is_finite() || *s < 0.0) {
            return Err(Error::Validation(format!(
                "score at {t} is {s}; scores must be finite and non-negative"
            )));
        }
        Ok(ScoreSeries { entries })
    }

    pub fn entries(&self) -> &[(Timestamp, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, s)| *s)
    }

    /// Largest score, or 0 for an empty series.
    pub fn max_score(&self) -> f64 {
        self.values().fold(0.0, f64::max)
    }

    /// Maximum score over the closed time interval [lo, hi], if any entry
    /// falls inside it.
    pub fn max_in_window(&self, lo: Timestamp, hi: Timestamp) -> Option<f64> {
        let from = self.entries.partition_point(|(t, _)| *t < lo);
        let mut best: Option<f64> = None;
        for (t, s) in &self.entries[from..] {
            if *t > hi {
                break;
            }
            best = Some(best.map_or(*s, |b| b.max(*s)));
        }
        best
    }
}

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

/// Format a value for CSV output: missing values become empty cells, finite
/// values use the shortest representation that parses back exactly.
fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                let io = std::io::Error::new(std::io::ErrorKind::Other, e.to_string());
                Error::io(path, io)
            }
            _ => Error::parse(1, e.to_string()),
        })
}

/// Header + rows of (timestamp, cells) shared by the three table loaders.
struct RawTable {
    names: Vec<String>,
    rows: Vec<(Timestamp, Vec<f64>)>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();

    let header = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(e)) => return Err(Error::parse(1, e.to_string())),
        None => return Err(Error::parse(1, "empty file: header row is mandatory")),
    };
    if header.get(0) != Some("timestamp") {
        return Err(Error::parse(
            1,
            format!(
                "first column must be named 'timestamp', found '{}'",
                header.get(0).unwrap_or("")
            ),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();

    let mut rows: Vec<(Timestamp, Vec<f64>)> = Vec::new();
    let mut prev: Option<Timestamp> = None;
    for record in records {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(rows.len() + 2);
            Error::parse(line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        if record.len() != names.len() + 1 {
            return Err(Error::parse(
                line,
                format!(
                    "expected {} fields, found {}",
                    names.len() + 1,
                    record.len()
                ),
            ));
        }
        let ts_field = record.get(0).unwrap_or("").trim();
        let ts: u64 = ts_field.parse().map_err(|_| {
            Error::parse(
                line,
                format!("'{ts_field}' is not a non-negative integer timestamp"),
            )
        })?;
        let ts = Timestamp(ts);
        if let Some(p) = prev {
            if ts <= p {
                return Err(Error::Validation(format!(
                    "timestamp {ts} at line {line} does not increase (previous was {p})"
                )));
            }
        }
        prev = Some(ts);

        let mut cells = Vec::with_capacity(names.len());
        for (k, field) in record.iter().skip(1).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                cells.push(f64::NAN);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(
                    line,
                    format!("column '{}': '{field}' is not a number", names[k]),
                )
            })?;
            if v.is_infinite() {
                return Err(Error::parse(
                    line,
                    format!("column '{}': non-finite value {field}", names[k]),
                ));
            }
            cells.push(v); // an explicit NaN counts as missing
        }
        rows.push((ts, cells));
    }
    Ok(RawTable { names, rows })
}

/// Load 1 Hz sensor data. Seconds absent from the file become all-NaN rows
/// so the returned series is dense over its span; the gap count is logged.
pub fn load_sensor_csv(path: &Path) -> Result<SensorSeries> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(Error::Validation(format!(
            "'{}' contains a header but no data rows",
            path.display()
        )));
    }
    let start = table.rows[0].0;
    let end = table.rows.last().expect("non-empty").0;
    let span = end.0 - start.0 + 1;
    if span > MAX_SENSOR_SPAN_S {
        return Err(Error::Validation(format!(
            "sensor span of {span} seconds exceeds the supported maximum"
        )));
    }
    let span = span as usize;
    let cols = table.names.len();
    let mut values = Matrix::from_vec(span, cols, vec![f64::NAN; span * cols]);
    for (ts, cells) in &table.rows {
        let r = (ts.0 - start.0) as usize;
        values.row_mut(r).copy_from_slice(cells);
    }
    let missing_rows = span - table.rows.len();
    if missing_rows > 0 {
        log::warn!(
            "{}: {missing_rows} of {span} seconds have no row; treating them as missing",
            path.display()
        );
    }
    let series = SensorSeries::new(start, table.names, values)?;
    log::info!(
        "{}: loaded {} sensor rows x {} features ({} missing cells)",
        path.display(),
        series.len(),
        series.feature_count(),
        series.missing_cells()
    );
    Ok(series)
}

/// Load the irregular operation-cycle table.
pub fn load_opcycle_csv(path: &Path) -> Result<OperationCycleSeries> {
    let table = read_table(path)?;
    if table.rows.is_empty() {
        return Err(Error::Validation(format!(
            "'{}' contains a header but no data rows",
            path.display()
        )));
    }
    let timestamps: Vec<Timestamp> = table.rows.iter().map(|(t, _)| *t).collect();
    let value_rows: Vec<Vec<f64>> = table.rows.into_iter().map(|(_, cells)| cells).collect();
    let series =
        OperationCycleSeries::new(timestamps, table.names, Matrix::from_rows(&value_rows))?;
    log::info!(
        "{}: loaded {} operation-cycle rows x {} features ({} missing cells)",
        path.display(),
        series.len(),
        series.feature_count(),
        series.missing_cells()
    );
    Ok(series)
}

/// Load alarm labels: a single `timestamp` column. An empty table is a
/// valid "no alarms" labelling.
pub fn load_labels_csv(path: &Path) -> Result<AlarmLabels> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(e)) => return Err(Error::parse(1, e.to_string())),
        None => return Err(Error::parse(1, "empty file: header row is mandatory")),
    };
    if header.len() != 1 || header.get(0) != Some("timestamp") {
        return Err(Error::parse(
            1,
            "label files have exactly one column named 'timestamp'",
        ));
    }
    let mut points = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(points.len() + 2);
            Error::parse(line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(points.len() + 2);
        let field = record.get(0).unwrap_or("").trim();
        let ts: u64 = field.parse().map_err(|_| {
            Error::parse(
                line,
                format!("'{field}' is not a non-negative integer timestamp"),
            )
        })?;
        points.push(Timestamp(ts));
    }
    AlarmLabels::new(points)
}

fn create_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| {
        let io = std::io::Error::new(std::io::ErrorKind::Other, e.to_string());
        Error::io(path, io)
    })
}

fn write_table<S: FeatureSeries>(series: &S, path: &Path) -> Result<()> {
    let mut writer = create_writer(path)?;
    let mut header = vec!["timestamp".to_owned()];
    header.extend_from_slice(series.feature_names());
    writer
        .write_record(&header)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    for i in 0..series.len() {
        let mut record = Vec::with_capacity(series.feature_count() + 1);
        record.push(series.timestamp_at(i).to_string());
        record.extend(series.values().row(i).iter().map(|v| format_cell(*v)));
        writer
            .write_record(&record)
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Write sensor data, one row per second of the span; missing cells are
/// left empty.
pub fn save_sensor_csv(series: &SensorSeries, path: &Path) -> Result<()> {
    write_table(series, path)
}

/// Write the operation-cycle table.
pub fn save_opcycle_csv(series: &OperationCycleSeries, path: &Path) -> Result<()> {
    write_table(series, path)
}

/// Write alarm labels.
pub fn save_labels_csv(labels: &AlarmLabels, path: &Path) -> Result<()> {
    let mut writer = create_writer(path)?;
    writer
        .write_record(["timestamp"])
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    for t in labels.points() {
        writer
            .write_record([t.to_string()])
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Write a score series as `timestamp,score`.
pub fn save_scores_csv(scores: &ScoreSeries, path: &Path) -> Result<()> {
    let mut writer = create_writer(path)?;
    writer
        .write_record(["timestamp", "score"])
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    for (t, s) in scores.entries() {
        writer
            .write_record([t.to_string(), format!("{s}")])
            .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Read a score series written by [`save_scores_csv`].
pub fn load_scores_csv(path: &Path) -> Result<ScoreSeries> {
    let table = read_table(path)?;
    if table.names != ["score"] {
        return Err(Error::parse(1, "score files have columns 'timestamp,score'"));
    }
    let mut entries = Vec::with_capacity(table.rows.len());
    for (t, cells) in table.rows {
        if cells[0].is_nan() {
            return Err(Error::Validation(format!("missing score at {t}")));
        }
        entries.push((t, cells[0]));
    }
    ScoreSeries::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn sensor_loader_fills_gap_rows_with_nan() {
        let f = write_temp("timestamp,a,b\n10,1.5,2\n11,,3\n13,4,5\n");
        let s = load_sensor_csv(f.path()).unwrap();
        assert_eq!(s.start(), Timestamp(10));
        assert_eq!(s.len(), 4); // seconds 10..=13
        assert_eq!(s.values().get(0, 0), 1.5);
        assert!(s.values().get(1, 0).is_nan()); // empty cell
        assert_eq!(s.values().get(1, 1), 3.0);
        assert!(s.values().get(2, 0).is_nan()); // synthesized gap row at t=12
        assert!(s.values().get(2, 1).is_nan());
        assert_eq!(s.values().get(3, 1), 5.0);
        assert_eq!(s.missing_cells(), 3);
        assert_eq!(s.row_index(Timestamp(12)), Some(2));
        assert_eq!(s.row_index(Timestamp(14)), None);
    }

    #[test]
    fn loader_rejects_bad_header_and_reports_line_numbers() {
        let f = write_temp("time,a\n0,1\n");
        match load_sensor_csv(f.path()) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("expected header parse error, got {other:?}"),
        }

        let f = write_temp("timestamp,a\n0,1\n1,zzz\n");
        match load_sensor_csv(f.path()) {
            Err(Error::Parse { line: 3, message }) => assert!(message.contains("zzz")),
            other => panic!("expected parse error at line 3, got {other:?}"),
        }

        let f = write_temp("timestamp,a\n0,1\n-5,2\n");
        match load_sensor_csv(f.path()) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error at line 3, got {other:?}"),
        }
    }

    #[test]
    fn loader_rejects_non_increasing_timestamps() {
        let f = write_temp("timestamp,a\n5,1\n5,2\n");
        assert!(matches!(
            load_sensor_csv(f.path()),
            Err(Error::Validation(_))
        ));
        let f = write_temp("timestamp,a\n5,1\n4,2\n");
        assert!(matches!(
            load_opcycle_csv(f.path()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn opcycle_loader_keeps_irregular_spacing() {
        let f = write_temp("timestamp,x,y\n0,1,2\n13,3,4\n27,5,6\n");
        let s = load_opcycle_csv(f.path()).unwrap();
        assert_eq!(
            s.timestamps(),
            &[Timestamp(0), Timestamp(13), Timestamp(27)]
        );
        assert_eq!(s.values().row(1), &[3.0, 4.0]);
    }

    #[test]
    fn labels_loader_accepts_empty_table() {
        let f = write_temp("timestamp\n");
        assert!(load_labels_csv(f.path()).unwrap().is_empty());
        let f = write_temp("timestamp\n100\n700\n");
        let l = load_labels_csv(f.path()).unwrap();
        assert_eq!(l.points(), &[Timestamp(100), Timestamp(700)]);
        let f = write_temp("timestamp,extra\n1,2\n");
        assert!(load_labels_csv(f.path()).is_err());
    }

    #[test]
    fn sensor_round_trip_preserves_values_and_gaps() {
        let f = write_temp("timestamp,a,b\n10,0.1,2\n11,,3\n14,0.30000000000000004,5\n");
        let s = load_sensor_csv(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_sensor_csv(&s, out.path()).unwrap();
        let s2 = load_sensor_csv(out.path()).unwrap();
        assert_eq!(s.start(), s2.start());
        assert_eq!(s.feature_names(), s2.feature_names());
        assert_eq!(s.len(), s2.len());
        for r in 0..s.len() {
            for c in 0..s.feature_count() {
                let (a, b) = (s.values().get(r, c), s2.values().get(r, c));
                assert!(a == b || (a.is_nan() && b.is_nan()), "mismatch at {r},{c}");
            }
        }
    }

    #[test]
    fn dataset_requires_cycles_and_labels_inside_sensor_span() {
        let sensor = SensorSeries::new(
            Timestamp(100),
            vec!["s".into()],
            Matrix::zeros(50, 1),
        )
        .unwrap();
        let op = OperationCycleSeries::new(
            vec![Timestamp(110), Timestamp(125)],
            vec!["o".into()],
            Matrix::zeros(2, 1),
        )
        .unwrap();
        assert!(HeterogeneousDataset::new(op.clone(), sensor.clone(), None).is_ok());

        let stray = OperationCycleSeries::new(
            vec![Timestamp(90)],
            vec!["o".into()],
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!(HeterogeneousDataset::new(stray, sensor.clone(), None).is_err());

        let labels = AlarmLabels::new(vec![Timestamp(200)]).unwrap();
        assert!(HeterogeneousDataset::new(op, sensor, Some(labels)).is_err());
    }

    #[test]
    fn score_series_validates_and_finds_window_maxima() {
        assert!(ScoreSeries::new(vec![(Timestamp(1), 0.5), (Timestamp(1), 0.7)]).is_err());
        assert!(ScoreSeries::new(vec![(Timestamp(1), -0.5)]).is_err());
        assert!(ScoreSeries::new(vec![(Timestamp(1), f64::NAN)]).is_err());

        let s = ScoreSeries::new(vec![
            (Timestamp(10), 1.0),
            (Timestamp(20), 5.0),
            (Timestamp(30), 3.0),
        ])
        .unwrap();
        assert_eq!(s.max_in_window(Timestamp(10), Timestamp(30)), Some(5.0));
        assert_eq!(s.max_in_window(Timestamp(21), Timestamp(30)), Some(3.0));
        assert_eq!(s.max_in_window(Timestamp(31), Timestamp(40)), None);
        assert_eq!(s.max_in_window(Timestamp(20), Timestamp(20)), Some(5.0));
        assert_eq!(s.max_score(), 5.0);
    }

    #[test]
    fn scores_csv_round_trip_is_exact() {
        let s = ScoreSeries::new(vec![
            (Timestamp(0), 0.1 + 0.2), // 0.30000000000000004
            (Timestamp(7), 1.0 / 3.0),
        ])
        .unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_scores_csv(&s, out.path()).unwrap();
        let s2 = load_scores_csv(out.path()).unwrap();
        assert_eq!(s, s2);
    }
}
