//! Core flow model: packet records, flow assembly, windowing and class labels.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; the operations are pure functions over their inputs.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Direction of a packet relative to the client endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "C2S")]
    ClientToServer,
    #[serde(rename = "S2C")]
    ServerToClient,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::ClientToServer => "C2S",
            Direction::ServerToClient => "S2C",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        match s {
            "C2S" => Some(Direction::ClientToServer),
            "S2C" => Some(Direction::ServerToClient),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single captured or generated packet event.
///
/// `timestamp` is in seconds (microsecond precision is enough for the trace
/// formats we ingest); `length` is the payload-inclusive IP length in bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp: f64,
    pub direction: Direction,
    pub length: u32,
    pub flow_id: String,
}

impl PacketRecord {
    pub fn new(
        timestamp: f64,
        direction: Direction,
        length: u32,
        flow_id: impl Into<String>,
    ) -> Self {
        let rec = PacketRecord {
            timestamp,
            direction,
            length,
            flow_id: flow_id.into(),
        };
        debug_assert!(rec.is_valid(), "invalid packet record: {rec:?}");
        rec
    }

    pub fn is_valid(&self) -> bool {
        self.timestamp.is_finite() && self.timestamp >= 0.0
    }
}

/// Opaque flow identifier; equality is exact, no wildcard matching.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowKey(pub String);

impl FlowKey {
    pub fn new(id: impl Into<String>) -> Self {
        FlowKey(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Service class of a flow. Exactly one label per labeled flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrafficClass {
    #[serde(rename = "progressive_streaming")]
    ProgressiveStreaming,
    #[serde(rename = "video_conference")]
    VideoConference,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 2] = [
        TrafficClass::ProgressiveStreaming,
        TrafficClass::VideoConference,
    ];

    /// Stable enumeration index, used for deterministic tie-breaking.
    pub fn index(&self) -> usize {
        match self {
            TrafficClass::ProgressiveStreaming => 0,
            TrafficClass::VideoConference => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<TrafficClass> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficClass::ProgressiveStreaming => "progressive_streaming",
            TrafficClass::VideoConference => "video_conference",
        }
    }

    pub fn parse(s: &str) -> Option<TrafficClass> {
        match s {
            "progressive_streaming" => Some(TrafficClass::ProgressiveStreaming),
            "video_conference" => Some(TrafficClass::VideoConference),
            _ => None,
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A time-ordered sequence of packets sharing one flow key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub key: FlowKey,
    pub records: Vec<PacketRecord>,
    pub label: Option<TrafficClass>,
}

impl Flow {
    /// Builds a flow, validating that records are time-sorted and share `key`.
    pub fn new(
        key: FlowKey,
        records: Vec<PacketRecord>,
        label: Option<TrafficClass>,
    ) -> Result<Flow, FlowError> {
        for pair in records.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(FlowError::UnsortedRecords { key: key.clone() });
            }
        }
        if let Some(r) = records.iter().find(|r| r.flow_id != key.0) {
            return Err(FlowError::KeyMismatch {
                key: key.clone(),
                found: r.flow_id.clone(),
            });
        }
        Ok(Flow {
            key,
            records,
            label,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Timestamp of the first packet, if any.
    pub fn start(&self) -> Option<f64> {
        self.records.first().map(|r| r.timestamp)
    }

    /// last - first packet timestamp; 0 for flows with a single packet.
    pub fn span(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }
}

/// Fixed observation-window geometry: `samples_per_window` throughput bins of
/// `bin` seconds each; `stride` is expressed in bins and defaults to the
/// window size (non-overlapping windows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub bin: f64,
    pub samples_per_window: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(
        bin: f64,
        samples_per_window: usize,
        stride: usize,
    ) -> Result<WindowSpec, FlowError> {
        if !(bin > 0.0) || !bin.is_finite() {
            return Err(FlowError::InvalidWindowSpec(
                "bin must be positive and finite",
            ));
        }
        if samples_per_window == 0 {
            return Err(FlowError::InvalidWindowSpec(
                "samples_per_window must be >= 1",
            ));
        }
        if stride == 0 {
            return Err(FlowError::InvalidWindowSpec("stride must be >= 1"));
        }
        Ok(WindowSpec {
            bin,
            samples_per_window,
            stride,
        })
    }

    /// Non-overlapping windows of `samples` 100 ms bins.
    pub fn non_overlapping(samples: usize) -> Result<WindowSpec, FlowError> {
        WindowSpec::new(0.1, samples, samples)
    }

    /// Window length in seconds.
    pub fn window_len(&self) -> f64 {
        self.bin * self.samples_per_window as f64
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            bin: 0.1,
            samples_per_window: 50,
            stride: 50,
        }
    }
}

/// A slice of one flow covering `[start, start + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowWindow {
    pub source: FlowKey,
    pub start: f64,
    pub duration: f64,
    pub records: Vec<PacketRecord>,
    pub label: Option<TrafficClass>,
}

impl FlowWindow {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow {key} spans less than one full window")]
    FlowTooShort { key: FlowKey },
    #[error("flow {key} has records out of timestamp order")]
    UnsortedRecords { key: FlowKey },
    #[error("flow {key} contains a record with flow_id {found}")]
    KeyMismatch { key: FlowKey, found: String },
    #[error("invalid window spec: {0}")]
    InvalidWindowSpec(&'static str),
    #[error("operation on an empty flow")]
    EmptyFlow,
}

/// Groups records by flow id and sorts each group by timestamp.
///
/// The sort is stable, so records with equal timestamps keep their input
/// order (captures typically preserve wire order). Flows come out in order of
/// first appearance of their key in the input.
pub fn assemble_flows(records: Vec<PacketRecord>) -> Vec<Flow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<PacketRecord>> = HashMap::new();
    for rec in records {
        groups
            .entry(rec.flow_id.clone())
            .or_insert_with(|| {
                order.push(rec.flow_id.clone());
                Vec::new()
            })
            .push(rec);
    }
    order
        .into_iter()
        .map(|id| {
            let mut recs = groups.remove(&id).expect("group exists for ordered key");
            recs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            Flow {
                key: FlowKey(id),
                records: recs,
                label: None,
            }
        })
        .collect()
}

/// Slices a flow into fixed windows tiling its active interval.
///
/// Window k starts at `first_ts + k * stride * bin`; a window is kept only if
/// it fits entirely inside `[first_ts, last_ts]`, so trailing partial windows
/// are dropped. Record membership is half-open: `[start, start + len)`.
pub fn window_flow(flow: &Flow, spec: &WindowSpec) -> Result<Vec<FlowWindow>, FlowError> {
    if flow.records.is_empty() {
        return Err(FlowError::EmptyFlow);
    }
    let origin = flow.records[0].timestamp;
    let span = flow.span();
    let len = spec.window_len();
    let stride_s = spec.bin * spec.stride as f64;

    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let start = origin + k as f64 * stride_s;
        if start + len > origin + span {
            break;
        }
        let end = start + len;
        let records: Vec<PacketRecord> = flow
            .records
            .iter()
            .filter(|r| r.timestamp >= start && r.timestamp < end)
            .cloned()
            .collect();
        windows.push(FlowWindow {
            source: flow.key.clone(),
            start,
            duration: len,
            records,
            label: flow.label,
        });
        k += 1;
    }

    if windows.is_empty() {
        return Err(FlowError::FlowTooShort {
            key: flow.key.clone(),
        });
    }
    Ok(windows)
}
