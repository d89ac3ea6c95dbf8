//! Classic pcap (libpcap file format) importer: 24-byte global header,
//! 16-byte record headers, Ethernet linktype, UDP over IPv4/IPv6 only.
//! pcap-ng is rejected, not partially supported.

use std::fs;
use std::net::IpAddr;

use crate::flow::{Direction, PacketRecord};

use super::{IngestError, SkipCounts, TraceReadOutcome, TraceSource};

const MAGIC_USEC: u32 = 0xa1b2_c3d4;
const MAGIC_USEC_SWAPPED: u32 = 0xd4c3_b2a1;
const PCAPNG_MAGIC: u32 = 0x0a0d_0d0a;
const LINKTYPE_ETHERNET: u32 = 1;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const PROTO_UDP: u8 = 17;

pub fn read_pcap_trace(source: &TraceSource) -> Result<TraceReadOutcome, IngestError> {
    let client = source.client_hint.ok_or(IngestError::MissingClientHint)?;
    let data = fs::read(&source.path).map_err(|e| IngestError::Io {
        path: source.path.clone(),
        source: e,
    })?;
    parse_pcap(&data, client)
}

pub fn parse_pcap(data: &[u8], client: IpAddr) -> Result<TraceReadOutcome, IngestError> {
    if data.len() < 24 {
        return Err(IngestError::UnsupportedFormat(
            "file shorter than a pcap global header".into(),
        ));
    }
    let raw_magic = u32::from_le_bytes([data[0], data[1], data[2], data[3]]);
    let little_endian = match raw_magic {
        MAGIC_USEC => true,
        MAGIC_USEC_SWAPPED => false,
        PCAPNG_MAGIC => {
            return Err(IngestError::UnsupportedFormat(
                "pcap-ng (magic 0x0a0d0d0a); only classic pcap is supported".into(),
            ))
        }
        other => {
            return Err(IngestError::UnsupportedFormat(format!(
                "unknown magic 0x{other:08x}"
            )))
        }
    };
    let read_u32 = |buf: &[u8], off: usize| -> u32 {
        let b = [buf[off], buf[off + 1], buf[off + 2], buf[off + 3]];
        if little_endian {
            u32::from_le_bytes(b)
        } else {
            u32::from_be_bytes(b)
        }
    };

    let linktype = read_u32(data, 20);
    if linktype != LINKTYPE_ETHERNET {
        return Err(IngestError::UnsupportedFormat(format!(
            "linktype {linktype}, only Ethernet (1) is supported"
        )));
    }

    let mut records = Vec::new();
    let mut skipped = SkipCounts::default();
    let mut off = 24usize;
    while off < data.len() {
        if off + 16 > data.len() {
            skipped.truncated += 1;
            break;
        }
        let ts_sec = read_u32(data, off);
        let ts_usec = read_u32(data, off + 4);
        let incl_len = read_u32(data, off + 8) as usize;
        off += 16;
        if off + incl_len > data.len() {
            skipped.truncated += 1;
            break;
        }
        let frame = &data[off..off + incl_len];
        off += incl_len;

        match parse_frame(frame, client) {
            FrameOutcome::Udp {
                length,
                direction,
                flow_id,
            } => {
                records.push(PacketRecord {
                    timestamp: ts_sec as f64 + ts_usec as f64 / 1e6,
                    direction,
                    length,
                    flow_id,
                });
            }
            FrameOutcome::Truncated => skipped.truncated += 1,
            FrameOutcome::NotUdp => skipped.non_udp += 1,
            FrameOutcome::UnresolvedDirection => skipped.unresolved_direction += 1,
        }
    }
    Ok(TraceReadOutcome { records, skipped })
}

enum FrameOutcome {
    Udp {
        length: u32,
        direction: Direction,
        flow_id: String,
    },
    Truncated,
    NotUdp,
    UnresolvedDirection,
}

fn parse_frame(frame: &[u8], client: IpAddr) -> FrameOutcome {
    if frame.len() < 14 {
        return FrameOutcome::Truncated;
    }
    let ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    let ip = &frame[14..];
    match ethertype {
        ETHERTYPE_IPV4 => parse_ipv4(ip, client),
        ETHERTYPE_IPV6 => parse_ipv6(ip, client),
        _ => FrameOutcome::NotUdp,
    }
}

fn parse_ipv4(ip: &[u8], client: IpAddr) -> FrameOutcome {
    if ip.len() < 20 {
        return FrameOutcome::Truncated;
    }
    let ihl = (ip[0] & 0x0f) as usize * 4;
    if ihl < 20 {
        return FrameOutcome::Truncated;
    }
    let total_length = u16::from_be_bytes([ip[2], ip[3]]) as u32;
    let protocol = ip[9];
    if protocol != PROTO_UDP {
        return FrameOutcome::NotUdp;
    }
    if ip.len() < ihl + 8 {
        return FrameOutcome::Truncated;
    }
    let src = IpAddr::from([ip[12], ip[13], ip[14], ip[15]]);
    let dst = IpAddr::from([ip[16], ip[17], ip[18], ip[19]]);
    let udp = &ip[ihl..];
    let sport = u16::from_be_bytes([udp[0], udp[1]]);
    let dport = u16::from_be_bytes([udp[2], udp[3]]);
    finish_udp(total_length, src, sport, dst, dport, client)
}

fn parse_ipv6(ip: &[u8], client: IpAddr) -> FrameOutcome {
    if ip.len() < 40 {
        return FrameOutcome::Truncated;
    }
    let payload_length = u16::from_be_bytes([ip[4], ip[5]]) as u32;
    let next_header = ip[6];
    // extension-header chains are out of scope; only plain UDP is accepted
    if next_header != PROTO_UDP {
        return FrameOutcome::NotUdp;
    }
    if ip.len() < 48 {
        return FrameOutcome::Truncated;
    }
    let mut s = [0u8; 16];
    s.copy_from_slice(&ip[8..24]);
    let mut d = [0u8; 16];
    d.copy_from_slice(&ip[24..40]);
    let src = IpAddr::from(s);
    let dst = IpAddr::from(d);
    let udp = &ip[40..];
    let sport = u16::from_be_bytes([udp[0], udp[1]]);
    let dport = u16::from_be_bytes([udp[2], udp[3]]);
    finish_udp(40 + payload_length, src, sport, dst, dport, client)
}

fn finish_udp(
    ip_total_length: u32,
    src: IpAddr,
    sport: u16,
    dst: IpAddr,
    dport: u16,
    client: IpAddr,
) -> FrameOutcome {
    let direction = if src == client {
        Direction::ClientToServer
    } else if dst == client {
        Direction::ServerToClient
    } else {
        return FrameOutcome::UnresolvedDirection;
    };
    FrameOutcome::Udp {
        length: ip_total_length,
        direction,
        flow_id: canonical_flow_id(src, sport, dst, dport),
    }
}

/// Canonical 5-tuple key: sorted endpoint pair plus protocol, so both
/// directions of one conversation share a key.
pub fn canonical_flow_id(a_ip: IpAddr, a_port: u16, b_ip: IpAddr, b_port: u16) -> String {
    let a = (a_ip, a_port);
    let b = (b_ip, b_port);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    format!("udp:{}:{}-{}:{}", lo.0, lo.1, hi.0, hi.1)
}
