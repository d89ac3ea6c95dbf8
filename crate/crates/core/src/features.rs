//! Both ML input representations — raw per-bin throughput series and the
//! 12-feature vector — plus sequence normalization and percentiles.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{Direction, FlowWindow, TrafficClass, WindowSpec};
use crate::ml::{Dataset, Representation};

/// Per-window throughput samples, one value (bits/s) per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputSeries {
    pub values: Vec<f64>,
    pub source: crate::flow::FlowKey,
    pub window_start: f64,
}

/// Sequence normalization modes.
///
/// `MinMaxPaper` divides each sample by `max - min` of the sequence without
/// subtracting the minimum; this is not conventional min-max scaling, but it
/// is the variant used throughout this pipeline. `StdNorm` is
/// `(x - mean) / population_std`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    #[serde(rename = "minmax")]
    MinMaxPaper,
    #[serde(rename = "stdnorm")]
    StdNorm,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::MinMaxPaper => "minmax",
            Normalization::StdNorm => "stdnorm",
        }
    }

    pub fn parse(s: &str) -> Option<Normalization> {
        match s {
            "minmax" => Some(Normalization::MinMaxPaper),
            "stdnorm" => Some(Normalization::StdNorm),
            _ => None,
        }
    }
}

/// The engineered per-window feature set, in fixed column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Packets per second averaged over the window.
    pub n_udp_avg: f64,
    /// Active span: last - first packet timestamp inside the window.
    pub t_w: f64,
    pub ln_p25: f64,
    pub ln_p50: f64,
    pub ln_p75: f64,
    pub ln_p90: f64,
    pub dt_p25: f64,
    pub dt_p50: f64,
    pub dt_p75: f64,
    pub dt_p90: f64,
    pub n_c2s: f64,
    pub n_s2c: f64,
}

/// Column names matching [`FeatureVector::to_row`] order.
pub const FEATURE_NAMES: [&str; 12] = [
    "n_udp_avg",
    "t_w",
    "ln_p25",
    "ln_p50",
    "ln_p75",
    "ln_p90",
    "dt_p25",
    "dt_p50",
    "dt_p75",
    "dt_p90",
    "n_c2s",
    "n_s2c",
];

impl FeatureVector {
    pub fn to_row(&self) -> [f64; 12] {
        [
            self.n_udp_avg,
            self.t_w,
            self.ln_p25,
            self.ln_p50,
            self.ln_p75,
            self.ln_p90,
            self.dt_p25,
            self.dt_p50,
            self.dt_p75,
            self.dt_p90,
            self.n_c2s,
            self.n_s2c,
        ]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("sequence has zero denominator under {0:?} normalization")]
    DegenerateSequence(Normalization),
    #[error("percentile of an empty value list")]
    EmptyInput,
    #[error("window has {0} packets, need at least 2")]
    InsufficientPackets(usize),
    #[error("window for flow {0} has no class label")]
    UnlabeledWindow(String),
    #[error("dataset file: {0}")]
    DatasetFile(String),
}

/// Sums packet bytes (both directions) into `samples_per_window` bins of
/// `bin` seconds and converts each bin to bits/s. Empty bins are 0.
pub fn throughput_series(window: &FlowWindow, spec: &WindowSpec) -> ThroughputSeries {
    debug_assert!(
        (window.duration - spec.window_len()).abs() < 1e-9,
        "window does not conform to spec"
    );
    let mut bytes = vec![0u64; spec.samples_per_window];
    for r in &window.records {
        let mut idx = ((r.timestamp - window.start) / spec.bin) as usize;
        // records on the upper boundary of the last bin belong to it
        if idx >= spec.samples_per_window {
            idx = spec.samples_per_window - 1;
        }
        bytes[idx] += r.length as u64;
    }
    ThroughputSeries {
        values: bytes.iter().map(|&b| b as f64 * 8.0 / spec.bin).collect(),
        source: window.source.clone(),
        window_start: window.start,
    }
}

/// Normalizes one sequence in place according to `mode`.
pub fn normalize(values: &[f64], mode: Normalization) -> Result<Vec<f64>, FeatureError> {
    match mode {
        Normalization::MinMaxPaper => {
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let denom = max - min;
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(FeatureError::DegenerateSequence(mode));
            }
            Ok(values.iter().map(|v| v / denom).collect())
        }
        Normalization::StdNorm => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if !(std > 0.0) || !std.is_finite() {
                return Err(FeatureError::DegenerateSequence(mode));
            }
            Ok(values.iter().map(|v| (v - mean) / std).collect())
        }
    }
}

/// Linear-interpolation percentile: rank = p/100 * (n-1) on the sorted values.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(percentile_sorted(&sorted, p))
}

/// Same as [`percentile`] for values already in ascending order.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Computes all 12 features of one window. Inter-arrival percentiles are
/// taken over the merged, time-ordered packet sequence (directions are not
/// split).
pub fn extract_features(window: &FlowWindow) -> Result<FeatureVector, FeatureError> {
    let n = window.records.len();
    if n < 2 {
        return Err(FeatureError::InsufficientPackets(n));
    }
    let total = n as f64;
    let first = window.records.first().unwrap().timestamp;
    let last = window.records.last().unwrap().timestamp;

    let mut lengths: Vec<f64> = window.records.iter().map(|r| r.length as f64).collect();
    lengths.sort_by(|a, b| a.total_cmp(b));

    let mut gaps: Vec<f64> = window
        .records
        .windows(2)
        .map(|pair| pair[1].timestamp - pair[0].timestamp)
        .collect();
    gaps.sort_by(|a, b| a.total_cmp(b));

    let n_c2s = window
        .records
        .iter()
        .filter(|r| r.direction == Direction::ClientToServer)
        .count();

    Ok(FeatureVector {
        n_udp_avg: total / window.duration,
        t_w: last - first,
        ln_p25: percentile_sorted(&lengths, 25.0),
        ln_p50: percentile_sorted(&lengths, 50.0),
        ln_p75: percentile_sorted(&lengths, 75.0),
        ln_p90: percentile_sorted(&lengths, 90.0),
        dt_p25: percentile_sorted(&gaps, 25.0),
        dt_p50: percentile_sorted(&gaps, 50.0),
        dt_p75: percentile_sorted(&gaps, 75.0),
        dt_p90: percentile_sorted(&gaps, 90.0),
        n_c2s: n_c2s as f64,
        n_s2c: (n - n_c2s) as f64,
    })
}

/// Per-column standardization for feature tables: `(x - mean) / population_std`,
/// with constant columns mapped to all zeros. This is an explicit pipeline
/// stage, not something the classifiers do internally; it is distinct from the
/// per-sequence [`normalize`] modes.
pub fn standardize_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    for row in rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut stds = vec![0.0; d];
    for row in rows {
        for j in 0..d {
            let c = row[j] - means[j];
            stds[j] += c * c;
        }
    }
    for s in &mut stds {
        *s = (*s / n).sqrt();
    }
    rows.iter()
        .map(|row| {
            (0..d)
                .map(|j| {
                    if stds[j] > 0.0 {
                        (row[j] - means[j]) / stds[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Builds a raw-series dataset (one row per window, one column per bin),
/// optionally normalizing each sequence. All windows must be labeled.
pub fn raw_series_dataset(
    windows: &[FlowWindow],
    spec: &WindowSpec,
    norm: Option<Normalization>,
) -> Result<Dataset, FeatureError> {
    let mut rows = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        let label = w
            .label
            .ok_or_else(|| FeatureError::UnlabeledWindow(w.source.to_string()))?;
        let series = throughput_series(w, spec);
        let row = match norm {
            Some(mode) => normalize(&series.values, mode)?,
            None => series.values,
        };
        rows.push(row);
        labels.push(label);
    }
    let names: Vec<String> = (0..spec.samples_per_window)
        .map(|k| format!("s{k}"))
        .collect();
    let mut ds = Dataset::new(rows, labels, Representation::RawSeries, names)
        .expect("series rows are finite and rectangular");
    if let Some(mode) = norm {
        ds = ds.with_normalization(mode);
    }
    Ok(ds)
}

/// Builds the 12-feature table dataset. Windows with fewer than 2 packets
/// cannot be featurized and are skipped; the count of skipped windows is
/// returned alongside.
pub fn table_dataset(windows: &[FlowWindow]) -> Result<(Dataset, usize), FeatureError> {
    let mut rows = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    let mut skipped = 0usize;
    for w in windows {
        let label = w
            .label
            .ok_or_else(|| FeatureError::UnlabeledWindow(w.source.to_string()))?;
        match extract_features(w) {
            Ok(fv) => {
                rows.push(fv.to_row().to_vec());
                labels.push(label);
            }
            Err(FeatureError::InsufficientPackets(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let ds = Dataset::new(rows, labels, Representation::TableFeatures, names)
        .expect("feature rows are finite and rectangular");
    Ok((ds, skipped))
}

/// Writes a dataset as CSV: feature columns in order plus a trailing `label`.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<(), FeatureError> {
    let mut out = String::new();
    out.push_str(&data.feature_names.join(","));
    out.push_str(",label\n");
    for (row, label) in data.rows.iter().zip(&data.labels) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(label.as_str());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| FeatureError::DatasetFile(e.to_string()))
}

/// Reads a dataset CSV written by [`write_dataset_csv`]. The representation
/// is inferred from the header: `s0..s{N-1}` columns mean a raw series.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset, FeatureError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| FeatureError::DatasetFile(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FeatureError::DatasetFile("empty file".into()))?;
    let mut names: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    match names.pop() {
        Some(last) if last == "label" => {}
        _ => {
            return Err(FeatureError::DatasetFile(
                "last column must be `label`".into(),
            ))
        }
    }
    let raw_series =
        !names.is_empty() && names.iter().enumerate().all(|(k, n)| n == &format!("s{k}"));
    let representation = if raw_series {
        Representation::RawSeries
    } else {
        Representation::TableFeatures
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(FeatureError::DatasetFile(format!(
                "line {}: expected {} fields, got {}",
                idx + 2,
                names.len() + 1,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(names.len());
        for f in &fields[..names.len()] {
            let v: f64 = f.parse().map_err(|_| {
                FeatureError::DatasetFile(format!("line {}: bad value `{f}`", idx + 2))
            })?;
            row.push(v);
        }
        let label = TrafficClass::parse(fields[names.len()]).ok_or_else(|| {
            FeatureError::DatasetFile(format!(
                "line {}: unknown label `{}`",
                idx + 2,
                fields[names.len()]
            ))
        })?;
        rows.push(row);
        labels.push(label);
    }
    Dataset::new(rows, labels, representation, names)
        .map_err(|e| FeatureError::DatasetFile(e.to_string()))
}
