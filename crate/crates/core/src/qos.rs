//! Soft-QoS conformance verification: path descriptors declare the expected
//! traffic class and rate envelope per prefix; a trained classifier checks
//! observed flows against the declaration, window by window.
//!
//! Descriptor distribution is abstracted to a local config file; prefixes
//! match flow identifiers by string prefix (for pcap-derived flows the id
//! embeds the endpoint addresses), with the longest match winning.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, Normalization};
use crate::flow::{Flow, FlowError, TrafficClass, WindowSpec};
use crate::ml::{MlError, Representation, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictPolicy {
    #[serde(rename = "report")]
    Report,
    #[serde(rename = "flag")]
    Flag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEnvelope {
    /// Ceiling on the flow's long-run mean bitrate, bits/s (both directions).
    pub mean_bitrate_max: f64,
    /// Ceiling on bytes observed in any sliding 1 s interval.
    pub burst_bytes_max: u64,
}

/// Declared expectation for flows under one prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub prefix: String,
    #[serde(rename = "class")]
    pub expected_class: TrafficClass,
    pub mean_bitrate_max: f64,
    pub burst_bytes_max: u64,
    #[serde(default = "default_policy")]
    pub policy: VerdictPolicy,
}

fn default_policy() -> VerdictPolicy {
    VerdictPolicy::Report
}

impl PathDescriptor {
    pub fn envelope(&self) -> RateEnvelope {
        RateEnvelope {
            mean_bitrate_max: self.mean_bitrate_max,
            burst_bytes_max: self.burst_bytes_max,
        }
    }
}

#[derive(Debug, Error)]
pub enum QosError {
    #[error("config: {0}")]
    Config(String),
    #[error("descriptors `{0}` and `{1}` overlap")]
    OverlappingPrefixes(String, String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PvdConfigFile {
    #[serde(rename = "descriptor", default)]
    descriptors: Vec<PathDescriptor>,
}

/// Loads and validates path descriptors from a TOML config. Prefixes must be
/// non-overlapping: no descriptor prefix may be a string prefix of another.
pub fn load_pvd_config(path: &Path) -> Result<Vec<PathDescriptor>, QosError> {
    let text = std::fs::read_to_string(path).map_err(|e| QosError::Config(e.to_string()))?;
    parse_pvd_config(&text)
}

pub fn parse_pvd_config(text: &str) -> Result<Vec<PathDescriptor>, QosError> {
    let file: PvdConfigFile = toml::from_str(text).map_err(|e| QosError::Config(e.to_string()))?;
    validate_descriptors(&file.descriptors)?;
    Ok(file.descriptors)
}

pub fn serialize_pvd_config(descriptors: &[PathDescriptor]) -> String {
    toml::to_string(&PvdConfigFile {
        descriptors: descriptors.to_vec(),
    })
    .expect("descriptors serialize to TOML")
}

pub fn validate_descriptors(descriptors: &[PathDescriptor]) -> Result<(), QosError> {
    for d in descriptors {
        if d.prefix.is_empty() {
            return Err(QosError::Config("descriptor prefix is empty".into()));
        }
        if !(d.mean_bitrate_max > 0.0) || d.burst_bytes_max == 0 {
            return Err(QosError::Config(format!(
                "descriptor `{}` has a non-positive rate envelope",
                d.prefix
            )));
        }
    }
    for (i, a) in descriptors.iter().enumerate() {
        for b in &descriptors[i + 1..] {
            if a.prefix.starts_with(&b.prefix) || b.prefix.starts_with(&a.prefix) {
                return Err(QosError::OverlappingPrefixes(
                    a.prefix.clone(),
                    b.prefix.clone(),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    #[serde(rename = "evaluated")]
    Evaluated,
    #[serde(rename = "insufficient_evidence")]
    InsufficientEvidence,
    #[serde(rename = "no_descriptor")]
    NoDescriptor,
}

/// Per-flow verification outcome with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVerdict {
    pub flow: String,
    pub descriptor_prefix: Option<String>,
    pub status: VerdictStatus,
    pub window_predictions: Vec<TrafficClass>,
    pub predicted_class: Option<TrafficClass>,
    pub measured_mean_bitrate: f64,
    pub max_bytes_in_1s: u64,
    pub class_conformant: Option<bool>,
    pub rate_conformant: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub flows: usize,
    pub conformant: usize,
    pub class_violations: usize,
    pub rate_violations: usize,
    pub insufficient: usize,
    pub unmatched: usize,
}

/// Aggregated verdicts for one trace, deterministic (sorted by flow key).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub entries: Vec<FlowVerdict>,
    pub summary: ReportSummary,
}

/// Measured total bytes * 8 / active span, both directions.
pub fn measured_mean_bitrate(flow: &Flow) -> f64 {
    let span = flow.span();
    if span <= 0.0 {
        return 0.0;
    }
    let bytes: u64 = flow.records.iter().map(|r| r.length as u64).sum();
    bytes as f64 * 8.0 / span
}

/// Largest byte count inside any sliding 1 s interval, two-pointer scan.
pub fn max_bytes_in_sliding_second(flow: &Flow) -> u64 {
    let records = &flow.records;
    let mut best = 0u64;
    let mut sum = 0u64;
    let mut lo = 0usize;
    for hi in 0..records.len() {
        sum += records[hi].length as u64;
        while records[hi].timestamp - records[lo].timestamp >= 1.0 {
            sum -= records[lo].length as u64;
            lo += 1;
        }
        best = best.max(sum);
    }
    best
}

fn window_row(
    window: &crate::flow::FlowWindow,
    spec: &WindowSpec,
    representation: Representation,
    normalization: Option<Normalization>,
) -> Option<Vec<f64>> {
    match representation {
        Representation::RawSeries => {
            let series = features::throughput_series(window, spec);
            match normalization {
                Some(mode) => features::normalize(&series.values, mode).ok(),
                None => Some(series.values),
            }
        }
        Representation::TableFeatures => features::extract_features(window)
            .ok()
            .map(|fv| fv.to_row().to_vec()),
    }
}

/// Verifies one flow against one descriptor: the majority prediction over
/// windows must match the declared class, and the measured rates must stay
/// inside the envelope. Flows too short for a single window yield an
/// insufficient-evidence entry that neither conforms nor violates.
pub fn verify_flow(
    flow: &Flow,
    descriptor: &PathDescriptor,
    model: &TrainedModel,
    spec: &WindowSpec,
) -> Result<FlowVerdict, QosError> {
    let mean_bitrate = measured_mean_bitrate(flow);
    let burst = max_bytes_in_sliding_second(flow);
    let insufficient = |mean: f64, burst: u64| FlowVerdict {
        flow: flow.key.to_string(),
        descriptor_prefix: Some(descriptor.prefix.clone()),
        status: VerdictStatus::InsufficientEvidence,
        window_predictions: Vec::new(),
        predicted_class: None,
        measured_mean_bitrate: mean,
        max_bytes_in_1s: burst,
        class_conformant: None,
        rate_conformant: None,
    };

    let windows = match crate::flow::window_flow(flow, spec) {
        Ok(w) => w,
        Err(FlowError::FlowTooShort { .. }) | Err(FlowError::EmptyFlow) => {
            return Ok(insufficient(mean_bitrate, burst))
        }
        Err(e) => return Err(QosError::Flow(e)),
    };

    let mut predictions = Vec::with_capacity(windows.len());
    for w in &windows {
        if let Some(row) = window_row(
            &w,
            spec,
            model.meta.representation,
            model.meta.normalization,
        ) {
            predictions.push(model.predict(&row)?);
        }
    }
    if predictions.is_empty() {
        return Ok(insufficient(mean_bitrate, burst));
    }

    let mut votes = [0usize; 2];
    for p in &predictions {
        votes[p.index()] += 1;
    }
    let majority = TrafficClass::from_index(usize::from(votes[1] > votes[0])).unwrap();

    Ok(FlowVerdict {
        flow: flow.key.to_string(),
        descriptor_prefix: Some(descriptor.prefix.clone()),
        status: VerdictStatus::Evaluated,
        window_predictions: predictions,
        predicted_class: Some(majority),
        measured_mean_bitrate: mean_bitrate,
        max_bytes_in_1s: burst,
        class_conformant: Some(majority == descriptor.expected_class),
        rate_conformant: Some(
            mean_bitrate <= descriptor.mean_bitrate_max && burst <= descriptor.burst_bytes_max,
        ),
    })
}

/// Matches every flow to its longest-prefix descriptor and verifies it.
/// Unmatched flows are reported under "no descriptor". Entries come out
/// sorted by flow key, so reports are bit-identical across runs.
pub fn monitor_trace(
    flows: &[Flow],
    descriptors: &[PathDescriptor],
    model: &TrainedModel,
    spec: &WindowSpec,
) -> Result<ConformanceReport, QosError> {
    validate_descriptors(descriptors)?;
    let mut entries = Vec::with_capacity(flows.len());
    for flow in flows {
        let matched = descriptors
            .iter()
            .filter(|d| flow.key.as_str().starts_with(&d.prefix))
            .max_by_key(|d| d.prefix.len());
        match matched {
            Some(descriptor) => entries.push(verify_flow(flow, descriptor, model, spec)?),
            None => entries.push(FlowVerdict {
                flow: flow.key.to_string(),
                descriptor_prefix: None,
                status: VerdictStatus::NoDescriptor,
                window_predictions: Vec::new(),
                predicted_class: None,
                measured_mean_bitrate: measured_mean_bitrate(flow),
                max_bytes_in_1s: max_bytes_in_sliding_second(flow),
                class_conformant: None,
                rate_conformant: None,
            }),
        }
    }
    entries.sort_by(|a, b| a.flow.cmp(&b.flow));

    let mut summary = ReportSummary {
        flows: entries.len(),
        ..ReportSummary::default()
    };
    for e in &entries {
        match e.status {
            VerdictStatus::NoDescriptor => summary.unmatched += 1,
            VerdictStatus::InsufficientEvidence => summary.insufficient += 1,
            VerdictStatus::Evaluated => {
                if e.class_conformant == Some(false) {
                    summary.class_violations += 1;
                }
                if e.rate_conformant == Some(false) {
                    summary.rate_violations += 1;
                }
                if e.class_conformant == Some(true) && e.rate_conformant == Some(true) {
                    summary.conformant += 1;
                }
            }
        }
    }
    Ok(ConformanceReport { entries, summary })
}

/// Human-readable rendering of a report.
pub fn render_text(report: &ConformanceReport) -> String {
    let mut out = String::new();
    let s = &report.summary;
    let _ = writeln!(
        out,
        "flows: {}  conformant: {}  class-violations: {}  rate-violations: {}  insufficient: {}  unmatched: {}",
        s.flows, s.conformant, s.class_violations, s.rate_violations, s.insufficient, s.unmatched
    );
    for e in &report.entries {
        let verdict = match e.status {
            VerdictStatus::NoDescriptor => "no descriptor".to_string(),
            VerdictStatus::InsufficientEvidence => "insufficient evidence".to_string(),
            VerdictStatus::Evaluated => format!(
                "class {} rate {}",
                if e.class_conformant == Some(true) {
                    "ok"
                } else {
                    "VIOLATION"
                },
                if e.rate_conformant == Some(true) {
                    "ok"
                } else {
                    "VIOLATION"
                },
            ),
        };
        let _ = writeln!(
            out,
            "{}  [{}]  mean {:.0} bit/s  burst {} B/s  predicted {}  -> {}",
            e.flow,
            e.descriptor_prefix.as_deref().unwrap_or("-"),
            e.measured_mean_bitrate,
            e.max_bytes_in_1s,
            e.predicted_class
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into()),
            verdict
        );
    }
    out
}

/// Groups windows' flows back into per-flow majority stats. Helper for
/// callers that need per-class tallies of a report.
pub fn verdict_counts_by_class(report: &ConformanceReport) -> HashMap<TrafficClass, usize> {
    let mut counts = HashMap::new();
    for e in &report.entries {
        if let Some(c) = e.predicted_class {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::CvSpec;
    use crate::features::table_dataset;
    use crate::flow::{assemble_flows, window_flow};
    use crate::ml::{train, ModelSpec};
    use crate::traffic::{
        apply_channel, generate_dataset, ChannelModel, ClassProfile, ScenarioConfig,
    };

    fn demo_config() -> String {
        r#"
[[descriptor]]
prefix = "demo-stream"
class = "progressive_streaming"
mean_bitrate_max = 4.0e6
burst_bytes_max = 2000000
policy = "report"

[[descriptor]]
prefix = "demo-conf"
class = "video_conference"
mean_bitrate_max = 4.0e6
burst_bytes_max = 2000000
policy = "flag"
"#
        .to_string()
    }

    #[test]
    fn empty_config_parses_to_no_descriptors() {
        assert!(parse_pvd_config("").unwrap().is_empty());
    }

    #[test]
    fn overlapping_prefixes_are_rejected() {
        let text = r#"
[[descriptor]]
prefix = "net-a"
class = "video_conference"
mean_bitrate_max = 1.0e6
burst_bytes_max = 100000

[[descriptor]]
prefix = "net-a-sub"
class = "progressive_streaming"
mean_bitrate_max = 1.0e6
burst_bytes_max = 100000
"#;
        assert!(matches!(
            parse_pvd_config(text),
            Err(QosError::OverlappingPrefixes(..))
        ));
    }

    #[test]
    fn config_round_trips_through_serialization() {
        let parsed = parse_pvd_config(&demo_config()).unwrap();
        assert_eq!(parsed.len(), 2);
        let rendered = serialize_pvd_config(&parsed);
        let again = parse_pvd_config(&rendered).unwrap();
        assert_eq!(parsed, again);
    }

    /// Small end-to-end fixture: generate labeled flows, fit a forest on
    /// table features, return (flows, model, spec).
    fn fixture() -> (Vec<crate::flow::Flow>, TrainedModel, WindowSpec) {
        let config = ScenarioConfig {
            name: "demo".into(),
            channel: ChannelModel::terrestrial()
                .with_capacity(5e6)
                .with_queue_limit(2_000_000),
            flows_per_class: 6,
            flow_duration: 11.0,
            seed: 99,
        };
        let profiles = [
            ClassProfile::streaming_default(),
            ClassProfile::conference_default(),
        ];
        let flows = generate_dataset(&config, &profiles).unwrap();
        let spec = WindowSpec::default();
        let windows: Vec<crate::flow::FlowWindow> = flows
            .iter()
            .flat_map(|f| window_flow(f, &spec).unwrap())
            .collect();
        let (table, _) = table_dataset(&windows).unwrap();
        let model = train(&ModelSpec::random_forest(15, 8, 64), &table, 5).unwrap();
        let _ = CvSpec::default();
        (flows, model, spec)
    }

    #[test]
    fn conforming_flows_pass_both_checks() {
        let (flows, model, spec) = fixture();
        let descriptors = vec![
            PathDescriptor {
                prefix: "demo-stream".into(),
                expected_class: TrafficClass::ProgressiveStreaming,
                mean_bitrate_max: 4.0e6,
                burst_bytes_max: 2_000_000,
                policy: VerdictPolicy::Report,
            },
            PathDescriptor {
                prefix: "demo-conf".into(),
                expected_class: TrafficClass::VideoConference,
                mean_bitrate_max: 4.0e6,
                burst_bytes_max: 2_000_000,
                policy: VerdictPolicy::Flag,
            },
        ];
        let report = monitor_trace(&flows, &descriptors, &model, &spec).unwrap();
        assert_eq!(report.summary.flows, 12);
        assert_eq!(report.summary.unmatched, 0);
        assert_eq!(report.summary.class_violations, 0);
        assert_eq!(report.summary.rate_violations, 0);
        assert_eq!(report.summary.conformant, 12);

        // re-running yields a bit-identical report
        let again = monitor_trace(&flows, &descriptors, &model, &spec).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn wrong_class_descriptor_flags_class_violation() {
        let (flows, model, spec) = fixture();
        let streaming_flow = flows
            .iter()
            .find(|f| f.label == Some(TrafficClass::ProgressiveStreaming))
            .unwrap();
        let descriptor = PathDescriptor {
            prefix: "demo-stream".into(),
            expected_class: TrafficClass::VideoConference, // mismatched on purpose
            mean_bitrate_max: 4.0e6,
            burst_bytes_max: 2_000_000,
            policy: VerdictPolicy::Flag,
        };
        let verdict = verify_flow(streaming_flow, &descriptor, &model, &spec).unwrap();
        assert_eq!(verdict.class_conformant, Some(false));
        assert_eq!(verdict.rate_conformant, Some(true));
    }

    #[test]
    fn rate_envelope_violation_is_detected_regardless_of_class() {
        let (flows, model, spec) = fixture();
        let flow = flows.first().unwrap();
        let measured = measured_mean_bitrate(flow);
        let descriptor = PathDescriptor {
            prefix: "demo".into(),
            expected_class: flow.label.unwrap(),
            mean_bitrate_max: measured / 2.0, // envelope at half the measured rate
            burst_bytes_max: u64::MAX / 2,
            policy: VerdictPolicy::Report,
        };
        let verdict = verify_flow(flow, &descriptor, &model, &spec).unwrap();
        assert_eq!(verdict.rate_conformant, Some(false));
    }

    #[test]
    fn envelope_enlargement_is_monotone() {
        let (flows, model, spec) = fixture();
        let flow = flows.first().unwrap();
        let descriptor = PathDescriptor {
            prefix: "demo".into(),
            expected_class: flow.label.unwrap(),
            mean_bitrate_max: measured_mean_bitrate(flow) * 1.5,
            burst_bytes_max: max_bytes_in_sliding_second(flow) + 1,
            policy: VerdictPolicy::Report,
        };
        let tight = verify_flow(flow, &descriptor, &model, &spec).unwrap();
        assert_eq!(tight.rate_conformant, Some(true));
        let mut wider = descriptor.clone();
        wider.mean_bitrate_max *= 10.0;
        wider.burst_bytes_max *= 10;
        let wide = verify_flow(flow, &wider, &model, &spec).unwrap();
        assert_eq!(wide.rate_conformant, Some(true));
        assert_eq!(wide.class_conformant, tight.class_conformant);
    }

    #[test]
    fn unmatched_flows_land_in_no_descriptor_bucket() {
        let (flows, model, spec) = fixture();
        let descriptors = vec![PathDescriptor {
            prefix: "other-net".into(),
            expected_class: TrafficClass::VideoConference,
            mean_bitrate_max: 1.0e6,
            burst_bytes_max: 100_000,
            policy: VerdictPolicy::Report,
        }];
        let report = monitor_trace(&flows, &descriptors, &model, &spec).unwrap();
        assert_eq!(report.summary.unmatched, report.summary.flows);
        assert!(report
            .entries
            .iter()
            .all(|e| e.status == VerdictStatus::NoDescriptor));
    }

    #[test]
    fn short_flow_yields_insufficient_evidence() {
        let (_, model, spec) = fixture();
        let records: Vec<crate::flow::PacketRecord> = (0..20)
            .map(|i| {
                crate::flow::PacketRecord::new(
                    i as f64 * 0.1,
                    crate::flow::Direction::ServerToClient,
                    500,
                    "short",
                )
            })
            .collect();
        let short = assemble_flows(records).remove(0);
        let descriptor = PathDescriptor {
            prefix: "short".into(),
            expected_class: TrafficClass::VideoConference,
            mean_bitrate_max: 1e9,
            burst_bytes_max: u64::MAX / 2,
            policy: VerdictPolicy::Report,
        };
        let verdict = verify_flow(&short, &descriptor, &model, &spec).unwrap();
        assert_eq!(verdict.status, VerdictStatus::InsufficientEvidence);
        assert_eq!(verdict.class_conformant, None);
        assert_eq!(verdict.rate_conformant, None);

        let channel = ChannelModel::terrestrial();
        let _ = apply_channel(&short, &channel, 0).unwrap();
    }

    #[test]
    fn sliding_window_burst_matches_naive_oracle() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut records: Vec<crate::flow::PacketRecord> = (0..300)
            .map(|_| {
                crate::flow::PacketRecord::new(
                    rng.gen_range(0.0..20.0),
                    crate::flow::Direction::ServerToClient,
                    rng.gen_range(40..1500),
                    "b",
                )
            })
            .collect();
        records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let flow = crate::flow::Flow::new(crate::flow::FlowKey::new("b"), records, None).unwrap();

        // naive O(n^2) oracle anchored at each packet
        let mut oracle = 0u64;
        for i in 0..flow.records.len() {
            let t0 = flow.records[i].timestamp;
            let sum: u64 = flow
                .records
                .iter()
                .filter(|r| r.timestamp >= t0 && r.timestamp < t0 + 1.0)
                .map(|r| r.length as u64)
                .sum();
            oracle = oracle.max(sum);
        }
        assert_eq!(max_bytes_in_sliding_second(&flow), oracle);
    }
}
