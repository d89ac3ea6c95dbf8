//! Trace ingestion: the canonical CSV interchange format and a classic-pcap
//! importer for UDP over IPv4/IPv6 over Ethernet.
//!
//! CSV schema (exact): header `timestamp_s,direction,length_bytes,flow_id`,
//! direction in {C2S, S2C}, UTF-8, LF line endings. The CSV format is the
//! interchange format; pcap is a convenience importer.

pub mod pcap;

use std::fs;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::flow::{Direction, PacketRecord};

pub const CSV_HEADER: &str = "timestamp_s,direction,length_bytes,flow_id";

/// Where a trace comes from and how to interpret it.
#[derive(Debug, Clone)]
pub struct TraceSource {
    pub format: TraceFormat,
    pub path: PathBuf,
    /// Client IP for pcap direction resolution. Without it, pcap ingestion
    /// fails loudly instead of guessing directions.
    pub client_hint: Option<IpAddr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Pcap,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    SchemaError {
        expected: &'static str,
        found: String,
    },
    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("unsupported capture format: {0}")]
    UnsupportedFormat(String),
    #[error("pcap ingestion requires a client address hint to resolve directions")]
    MissingClientHint,
    #[error("flow id `{0}` cannot be written to CSV (contains comma or newline)")]
    UnwritableFlowId(String),
}

/// Reads a canonical CSV trace. Rows with non-numeric fields are rejected
/// with their line number.
pub fn read_csv_trace(path: &Path) -> Result<Vec<PacketRecord>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv_trace(&text)
}

pub fn parse_csv_trace(text: &str) -> Result<Vec<PacketRecord>, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(IngestError::SchemaError {
                expected: CSV_HEADER,
                found: header.to_string(),
            })
        }
        None => {
            return Err(IngestError::SchemaError {
                expected: CSV_HEADER,
                found: String::new(),
            })
        }
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.splitn(4, ',');
        let (ts, dir, len, id) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => {
                return Err(IngestError::ParseError {
                    line: line_no,
                    reason: format!("expected 4 comma-separated fields, got `{line}`"),
                })
            }
        };
        let timestamp: f64 = ts.parse().map_err(|_| IngestError::ParseError {
            line: line_no,
            reason: format!("bad timestamp `{ts}`"),
        })?;
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(IngestError::ParseError {
                line: line_no,
                reason: format!("timestamp `{ts}` must be finite and >= 0"),
            });
        }
        let direction = Direction::parse(dir).ok_or_else(|| IngestError::ParseError {
            line: line_no,
            reason: format!("bad direction `{dir}`, expected C2S or S2C"),
        })?;
        let length: u32 = len.parse().map_err(|_| IngestError::ParseError {
            line: line_no,
            reason: format!("bad length `{len}`"),
        })?;
        records.push(PacketRecord {
            timestamp,
            direction,
            length,
            flow_id: id.to_string(),
        });
    }
    Ok(records)
}

/// Writes records in the canonical CSV format. Timestamps round-trip exactly
/// (shortest decimal representation).
pub fn write_csv_trace(path: &Path, records: &[PacketRecord]) -> Result<(), IngestError> {
    let mut out = String::with_capacity(records.len() * 32 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        if r.flow_id.contains(',') || r.flow_id.contains('\n') {
            return Err(IngestError::UnwritableFlowId(r.flow_id.clone()));
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.timestamp,
            r.direction.as_str(),
            r.length,
            r.flow_id
        ));
    }
    let mut file = fs::File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(out.as_bytes())
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Dispatches on the source format.
pub fn read_trace(source: &TraceSource) -> Result<TraceReadOutcome, IngestError> {
    match source.format {
        TraceFormat::Csv => Ok(TraceReadOutcome {
            records: read_csv_trace(&source.path)?,
            skipped: SkipCounts::default(),
        }),
        TraceFormat::Pcap => pcap::read_pcap_trace(source),
    }
}

/// Records plus per-reason skip counts; record count is always <= packet
/// count in the file.
#[derive(Debug)]
pub struct TraceReadOutcome {
    pub records: Vec<PacketRecord>,
    pub skipped: SkipCounts,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SkipCounts {
    pub truncated: usize,
    pub non_udp: usize,
    pub unresolved_direction: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.truncated + self.non_udp + self.unresolved_direction
    }
}
