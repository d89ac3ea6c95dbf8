//! Synthetic labeled traffic generation and channel emulation.
//!
//! Two workload shapes are modeled: chunked on/off delivery (progressive
//! streaming) and frame-paced bidirectional delivery (video conferencing).
//! Flows are pushed through an emulated channel with propagation delay,
//! uniform jitter and a FIFO bottleneck with tail-drop, reproducing a
//! terrestrial link, a GEO satellite and a LEO satellite.
//!
//! Everything is seed-deterministic: identical (inputs, seed) produce
//! identical packet lists. Per-flow seeds are derived from the scenario seed
//! with a splitmix64 finalizer (see [`mix_seed`]), so flows can be generated
//! independently and in parallel without changing the output.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{Direction, Flow, FlowKey, PacketRecord, TrafficClass};

/// Default source line rate in bits/s: packets leave the sender back-to-back
/// at this rate, well above any emulated bottleneck.
pub const DEFAULT_LINE_RATE: f64 = 100e6;

/// Size of the client acknowledgment-like packets emitted by the chunked
/// shape (1 per 10 server packets).
pub const ACK_BYTES: u32 = 80;

/// Workload description for one traffic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: TrafficClass,
    /// Target long-run server-to-client bitrate, bits/s.
    pub mean_bitrate: f64,
    /// Source line rate, bits/s (spacing of back-to-back packets).
    pub line_rate: f64,
    /// Uniform +/- fractional jitter on the line rate, drawn once per flow
    /// (server pacing varies with load). 0 = fixed pacing.
    #[serde(default)]
    pub line_jitter: f64,
    pub shape: TrafficShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrafficShape {
    /// On/off chunk delivery: every `chunk_period` seconds a burst of
    /// back-to-back packets carrying `chunk_size` bytes, plus sparse C2S
    /// acknowledgment-like packets (1 per 10 S2C packets, 80 bytes).
    Chunked {
        chunk_size: u64,
        chunk_period: f64,
        packet_size: u32,
        /// Uniform +/- jitter on packet sizes, bytes. 0 = fixed sizes.
        packet_jitter: u32,
        /// Uniform +/- fractional jitter on each chunk's size (VBR encoding).
        /// The long-run bitrate is preserved in expectation.
        #[serde(default)]
        chunk_jitter: f64,
    },
    /// Frame-paced delivery at `frame_rate` Hz with jittered packet sizes and
    /// a symmetric C2S stream at the same cadence (offset by half a frame).
    /// Packets per frame are derived from the bitrate. Optional auxiliary
    /// per-direction packet streams (audio, control, FEC) ride alongside.
    Framed {
        frame_rate: f64,
        packet_mean: u32,
        packet_jitter: u32,
        /// Uniform +/- jitter on the per-frame packet count (I/P frame size
        /// variability). The mean count still follows the bitrate.
        #[serde(default)]
        ppf_jitter: u32,
        #[serde(default)]
        aux: Vec<AuxStream>,
    },
}

impl ClassProfile {
    /// Chunked profile with the stock parameters: 1.2 Mb/s, 600 kB chunks
    /// every 4 s, 1350-byte packets.
    pub fn streaming_default() -> ClassProfile {
        ClassProfile {
            class: TrafficClass::ProgressiveStreaming,
            mean_bitrate: 1.2e6,
            line_rate: DEFAULT_LINE_RATE,
            line_jitter: 0.0,
            shape: TrafficShape::Chunked {
                chunk_size: 600_000,
                chunk_period: 4.0,
                packet_size: 1350,
                packet_jitter: 0,
                chunk_jitter: 0.0,
            },
        }
    }

    /// Framed profile with the stock parameters: 1.2 Mb/s, 30 Hz frames,
    /// 500 +/- 200 byte packets.
    pub fn conference_default() -> ClassProfile {
        ClassProfile {
            class: TrafficClass::VideoConference,
            mean_bitrate: 1.2e6,
            line_rate: DEFAULT_LINE_RATE,
            line_jitter: 0.0,
            shape: TrafficShape::Framed {
                frame_rate: 30.0,
                packet_mean: 500,
                packet_jitter: 200,
                ppf_jitter: 0,
                aux: Vec::new(),
            },
        }
    }

    /// Derived packet count per frame for framed profiles: the bitrate left
    /// after the auxiliary streams, split across frames of mean-sized packets.
    pub fn packets_per_frame(&self) -> Option<u32> {
        match &self.shape {
            TrafficShape::Framed {
                frame_rate,
                packet_mean,
                aux,
                ..
            } => {
                let aux_rate: f64 = aux.iter().map(|a| a.bitrate()).sum();
                let video_rate = self.mean_bitrate - aux_rate;
                let ppf = video_rate / (8.0 * frame_rate * *packet_mean as f64);
                Some((ppf.round() as u32).max(1))
            }
            TrafficShape::Chunked { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.mean_bitrate > 0.0) {
            return Err(TrafficError::InvalidProfile(
                "mean_bitrate must be > 0".into(),
            ));
        }
        if !(self.line_rate > 0.0) {
            return Err(TrafficError::InvalidProfile("line_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.line_jitter) {
            return Err(TrafficError::InvalidProfile(
                "line_jitter must lie in [0, 1)".into(),
            ));
        }
        match &self.shape {
            TrafficShape::Chunked {
                chunk_size,
                chunk_period,
                packet_size,
                packet_jitter,
                chunk_jitter,
            } => {
                if *chunk_size == 0 || *packet_size == 0 || !(*chunk_period > 0.0) {
                    return Err(TrafficError::InvalidProfile(
                        "chunk_size, packet_size and chunk_period must be positive".into(),
                    ));
                }
                if packet_jitter >= packet_size {
                    return Err(TrafficError::InvalidProfile(
                        "packet_jitter must be smaller than packet_size".into(),
                    ));
                }
                if !(0.0..1.0).contains(chunk_jitter) {
                    return Err(TrafficError::InvalidProfile(
                        "chunk_jitter must lie in [0, 1)".into(),
                    ));
                }
                let chunk_rate = *chunk_size as f64 * 8.0 / chunk_period;
                if (chunk_rate - self.mean_bitrate).abs() > 0.1 * self.mean_bitrate {
                    return Err(TrafficError::InvalidProfile(format!(
                        "chunk_size * 8 / chunk_period = {chunk_rate:.0} deviates more than 10% \
                         from mean_bitrate {:.0}",
                        self.mean_bitrate
                    )));
                }
            }
            TrafficShape::Framed {
                frame_rate,
                packet_mean,
                packet_jitter,
                ppf_jitter,
                aux,
            } => {
                if !(*frame_rate > 0.0) || *packet_mean == 0 {
                    return Err(TrafficError::InvalidProfile(
                        "frame_rate and packet_mean must be positive".into(),
                    ));
                }
                if packet_jitter >= packet_mean {
                    return Err(TrafficError::InvalidProfile(
                        "packet_jitter must be smaller than packet_mean".into(),
                    ));
                }
                for a in aux {
                    if !(a.rate > 0.0) || a.size == 0 || a.size_jitter >= a.size {
                        return Err(TrafficError::InvalidProfile(
                            "aux streams need positive rate and size, with size_jitter < size"
                                .into(),
                        ));
                    }
                }
                let ppf = self.packets_per_frame().unwrap();
                if *ppf_jitter >= ppf {
                    return Err(TrafficError::InvalidProfile(
                        "ppf_jitter must be smaller than the derived packets_per_frame".into(),
                    ));
                }
                let realized = ppf as f64 * *packet_mean as f64 * 8.0 * frame_rate
                    + aux.iter().map(|a| a.bitrate()).sum::<f64>();
                if (realized - self.mean_bitrate).abs() > 0.1 * self.mean_bitrate {
                    return Err(TrafficError::InvalidProfile(format!(
                        "packets_per_frame rounding yields {realized:.0} bits/s, deviating more \
                         than 10% from mean_bitrate {:.0}",
                        self.mean_bitrate
                    )));
                }
            }
        }
        Ok(())
    }

    fn short_name(&self) -> &'static str {
        match self.class {
            TrafficClass::ProgressiveStreaming => "stream",
            TrafficClass::VideoConference => "conf",
        }
    }
}

/// Emulated path: fixed propagation delay, uniform jitter in
/// `[0, jitter_bound]`, a FIFO bottleneck of `capacity` bits/s (0 means
/// unlimited) and a tail-drop queue of `queue_limit` bytes per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    #[serde(default)]
    pub propagation_delay: f64,
    #[serde(default)]
    pub jitter_bound: f64,
    #[serde(default)]
    pub capacity: f64,
    #[serde(default = "default_queue_limit")]
    pub queue_limit: u64,
}

fn default_queue_limit() -> u64 {
    256_000
}

/// A constant-cadence side stream (audio/control/FEC), emitted per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxStream {
    /// Packets per second per direction.
    pub rate: f64,
    pub size: u32,
    #[serde(default)]
    pub size_jitter: u32,
}

impl AuxStream {
    fn bitrate(&self) -> f64 {
        self.rate * self.size as f64 * 8.0
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            propagation_delay: 0.0,
            jitter_bound: 0.0,
            capacity: 0.0,
            queue_limit: default_queue_limit(),
        }
    }
}

impl ChannelModel {
    /// Terrestrial link: no delay.
    pub fn terrestrial() -> ChannelModel {
        ChannelModel::default()
    }

    /// Geostationary satellite: 250 ms propagation delay each direction.
    pub fn geo() -> ChannelModel {
        ChannelModel {
            propagation_delay: 0.25,
            ..ChannelModel::default()
        }
    }

    /// LEO satellite: 50 ms constant delay plus up to 50 ms uniform jitter.
    pub fn leo() -> ChannelModel {
        ChannelModel {
            propagation_delay: 0.05,
            jitter_bound: 0.05,
            ..ChannelModel::default()
        }
    }

    pub fn with_capacity(mut self, bits_per_second: f64) -> ChannelModel {
        self.capacity = bits_per_second;
        self
    }

    pub fn with_queue_limit(mut self, bytes: u64) -> ChannelModel {
        self.queue_limit = bytes;
        self
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.propagation_delay < 0.0 || self.jitter_bound < 0.0 || self.capacity < 0.0 {
            return Err(TrafficError::InvalidChannel);
        }
        Ok(())
    }
}

/// One emulated collection run: which channel, how many flows per profile,
/// how long each flow lasts, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub channel: ChannelModel,
    pub flows_per_class: usize,
    pub flow_duration: f64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("channel parameters must be non-negative")]
    InvalidChannel,
    #[error("flow duration must be at least 1 s, got {0}")]
    DurationTooShort(f64),
    #[error("scenario config: {0}")]
    Config(String),
}

/// splitmix64 finalizer used to derive per-flow seeds from a master seed.
/// Stable across runs and platforms.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates one labeled flow at the source (no channel effects), with a key
/// derived from the class and seed.
pub fn generate_flow(
    profile: &ClassProfile,
    duration: f64,
    seed: u64,
) -> Result<Flow, TrafficError> {
    let key = FlowKey::new(format!("{}-{seed:016x}", profile.short_name()));
    generate_flow_keyed(profile, duration, seed, key)
}

/// Same as [`generate_flow`] with an explicit flow key.
pub fn generate_flow_keyed(
    profile: &ClassProfile,
    duration: f64,
    seed: u64,
    key: FlowKey,
) -> Result<Flow, TrafficError> {
    profile.validate()?;
    if duration < 1.0 {
        return Err(TrafficError::DurationTooShort(duration));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line_rate = if profile.line_jitter > 0.0 {
        profile.line_rate * (1.0 + rng.gen_range(-profile.line_jitter..=profile.line_jitter))
    } else {
        profile.line_rate
    };
    let mut records = match &profile.shape {
        TrafficShape::Chunked {
            chunk_size,
            chunk_period,
            packet_size,
            packet_jitter,
            chunk_jitter,
        } => emit_chunked(
            &key,
            duration,
            line_rate,
            *chunk_size,
            *chunk_period,
            *packet_size,
            *packet_jitter,
            *chunk_jitter,
            &mut rng,
        ),
        TrafficShape::Framed {
            frame_rate,
            packet_mean,
            packet_jitter,
            ppf_jitter,
            aux,
        } => emit_framed(
            &key,
            duration,
            line_rate,
            FramedParams {
                frame_rate: *frame_rate,
                packet_mean: *packet_mean,
                packet_jitter: *packet_jitter,
                packets_per_frame: profile.packets_per_frame().unwrap(),
                ppf_jitter: *ppf_jitter,
                aux: aux.clone(),
            },
            &mut rng,
        ),
    };
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Flow::new(key, records, Some(profile.class)).map_err(|e| TrafficError::Config(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn emit_chunked(
    key: &FlowKey,
    duration: f64,
    line_rate: f64,
    chunk_size: u64,
    chunk_period: f64,
    packet_size: u32,
    packet_jitter: u32,
    chunk_jitter: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<PacketRecord> {
    let mut records = Vec::new();
    let mut k = 0u64;
    loop {
        let chunk_start = k as f64 * chunk_period;
        if chunk_start >= duration {
            break;
        }
        // the final chunk is prorated so the long-run bitrate stays on target
        let fraction = ((duration - chunk_start) / chunk_period).min(1.0);
        let vbr = if chunk_jitter > 0.0 {
            1.0 + rng.gen_range(-chunk_jitter..=chunk_jitter)
        } else {
            1.0
        };
        let mut remaining = (chunk_size as f64 * fraction * vbr).round() as u64;
        let mut t = chunk_start;
        let mut data_packets = 0u64;
        while remaining > 0 {
            let nominal = if packet_jitter == 0 {
                packet_size
            } else {
                rng.gen_range(packet_size - packet_jitter..=packet_size + packet_jitter)
            };
            let size = (nominal as u64).min(remaining) as u32;
            remaining -= size as u64;
            records.push(PacketRecord {
                timestamp: t,
                direction: Direction::ServerToClient,
                length: size,
                flow_id: key.0.clone(),
            });
            t += size as f64 * 8.0 / line_rate;
            data_packets += 1;
        }
        // acknowledgment-like packets, 1 per 10 data packets, clocked by the
        // ongoing delivery rather than the source burst: paced evenly across
        // the chunk period
        let n_acks = data_packets / 10;
        let span = chunk_period * fraction;
        for a in 0..n_acks {
            records.push(PacketRecord {
                timestamp: chunk_start + (a as f64 + 0.5) * span / n_acks as f64,
                direction: Direction::ClientToServer,
                length: ACK_BYTES,
                flow_id: key.0.clone(),
            });
        }
        k += 1;
    }
    records
}

struct FramedParams {
    frame_rate: f64,
    packet_mean: u32,
    packet_jitter: u32,
    packets_per_frame: u32,
    ppf_jitter: u32,
    aux: Vec<AuxStream>,
}

fn emit_framed(
    key: &FlowKey,
    duration: f64,
    line_rate: f64,
    params: FramedParams,
    rng: &mut ChaCha8Rng,
) -> Vec<PacketRecord> {
    let mut records = Vec::new();
    let period = 1.0 / params.frame_rate;
    // the client stream runs at the same cadence, offset half a frame
    for (direction, offset) in [
        (Direction::ServerToClient, 0.0),
        (Direction::ClientToServer, period / 2.0),
    ] {
        let mut k = 0u64;
        loop {
            let frame_start = k as f64 * period + offset;
            if frame_start >= duration {
                break;
            }
            let mut t = frame_start;
            let count = if params.ppf_jitter == 0 {
                params.packets_per_frame
            } else {
                rng.gen_range(
                    params.packets_per_frame - params.ppf_jitter
                        ..=params.packets_per_frame + params.ppf_jitter,
                )
            };
            for _ in 0..count {
                let size = if params.packet_jitter == 0 {
                    params.packet_mean
                } else {
                    rng.gen_range(
                        params.packet_mean - params.packet_jitter
                            ..=params.packet_mean + params.packet_jitter,
                    )
                };
                records.push(PacketRecord {
                    timestamp: t,
                    direction,
                    length: size,
                    flow_id: key.0.clone(),
                });
                t += size as f64 * 8.0 / line_rate;
            }
            k += 1;
        }
    }
    // auxiliary side streams (audio/control/FEC), both directions
    for stream in &params.aux {
        let aux_period = 1.0 / stream.rate;
        for (direction, offset) in [
            (Direction::ServerToClient, 0.0),
            (Direction::ClientToServer, aux_period / 2.0),
        ] {
            let mut k = 0u64;
            loop {
                let t = k as f64 * aux_period + offset;
                if t >= duration {
                    break;
                }
                let size = if stream.size_jitter == 0 {
                    stream.size
                } else {
                    rng.gen_range(
                        stream.size - stream.size_jitter..=stream.size + stream.size_jitter,
                    )
                };
                records.push(PacketRecord {
                    timestamp: t,
                    direction,
                    length: size,
                    flow_id: key.0.clone(),
                });
                k += 1;
            }
        }
    }
    records
}

/// Pushes a flow through the emulated channel.
///
/// Each direction is an independent FIFO bottleneck: packets are serialized
/// at `capacity` bits/s in arrival order (`depart_i = max(arrive_i,
/// depart_{i-1}) + len_i * 8 / capacity`), then delayed by the propagation
/// delay plus a uniform jitter draw, with delivery order forced
/// non-decreasing within the direction. Packets arriving to a backlog above
/// `queue_limit` bytes are tail-dropped. Jitter is drawn per arriving packet
/// (dropped or not), so drop patterns do not shift later draws.
pub fn apply_channel(flow: &Flow, channel: &ChannelModel, seed: u64) -> Result<Flow, TrafficError> {
    channel.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    struct DirState {
        last_depart: f64,
        last_delivery: f64,
        queue: VecDeque<(f64, u64)>,
        backlog: u64,
    }
    impl DirState {
        fn new() -> Self {
            DirState {
                last_depart: f64::NEG_INFINITY,
                last_delivery: f64::NEG_INFINITY,
                queue: VecDeque::new(),
                backlog: 0,
            }
        }
    }

    let mut c2s = DirState::new();
    let mut s2c = DirState::new();
    let mut out = Vec::with_capacity(flow.records.len());

    for r in &flow.records {
        let jitter = if channel.jitter_bound > 0.0 {
            rng.gen_range(0.0..=channel.jitter_bound)
        } else {
            0.0
        };
        let state = match r.direction {
            Direction::ClientToServer => &mut c2s,
            Direction::ServerToClient => &mut s2c,
        };
        while let Some(&(depart, len)) = state.queue.front() {
            if depart <= r.timestamp {
                state.backlog -= len;
                state.queue.pop_front();
            } else {
                break;
            }
        }
        if state.backlog > channel.queue_limit {
            continue; // tail drop
        }
        let serialization = if channel.capacity > 0.0 {
            r.length as f64 * 8.0 / channel.capacity
        } else {
            0.0
        };
        let depart = r.timestamp.max(state.last_depart) + serialization;
        let delivery = (depart + channel.propagation_delay + jitter).max(state.last_delivery);
        state.queue.push_back((depart, r.length as u64));
        state.backlog += r.length as u64;
        state.last_depart = depart;
        state.last_delivery = delivery;
        out.push(PacketRecord {
            timestamp: delivery,
            direction: r.direction,
            length: r.length,
            flow_id: r.flow_id.clone(),
        });
    }

    out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Flow::new(flow.key.clone(), out, flow.label).map_err(|e| TrafficError::Config(e.to_string()))
}

/// Generates `flows_per_class` flows per profile, shaped by the scenario
/// channel and labeled. Fully deterministic in `config.seed`.
pub fn generate_dataset(
    config: &ScenarioConfig,
    profiles: &[ClassProfile],
) -> Result<Vec<Flow>, TrafficError> {
    if profiles.is_empty() {
        return Err(TrafficError::Config(
            "at least one profile is required".into(),
        ));
    }
    let mut flows = Vec::with_capacity(profiles.len() * config.flows_per_class);
    for (p_idx, profile) in profiles.iter().enumerate() {
        for i in 0..config.flows_per_class {
            let key = FlowKey::new(format!(
                "{}-{}{}-{}",
                config.name,
                profile.short_name(),
                p_idx,
                i
            ));
            let flow_seed = mix_seed(mix_seed(config.seed, p_idx as u64), i as u64);
            let source =
                generate_flow_keyed(profile, config.flow_duration, mix_seed(flow_seed, 1), key)?;
            flows.push(apply_channel(
                &source,
                &config.channel,
                mix_seed(flow_seed, 2),
            )?);
        }
    }
    Ok(flows)
}

/// On-disk scenario description: the config plus the profile list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    pub flows_per_class: usize,
    pub flow_duration: f64,
    pub channel: ChannelModel,
    #[serde(rename = "profile")]
    pub profiles: Vec<ProfileEntry>,
}

/// One `[[profile]]` table in a scenario file. The shape is inferred from
/// which fields are present: chunked fields or framed fields, not both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub class: TrafficClass,
    pub mean_bitrate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunk_period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunk_jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_mean: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet_jitter: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppf_jitter: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux: Vec<AuxStream>,
}

impl ScenarioFile {
    pub fn from_toml_str(text: &str) -> Result<(ScenarioConfig, Vec<ClassProfile>), TrafficError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| TrafficError::Config(e.to_string()))?;
        let config = ScenarioConfig {
            name: file.name.clone(),
            channel: file.channel,
            flows_per_class: file.flows_per_class,
            flow_duration: file.flow_duration,
            seed: file.seed,
        };
        let mut profiles = Vec::new();
        for (i, entry) in file.profiles.iter().enumerate() {
            profiles.push(
                entry
                    .to_profile()
                    .map_err(|e| TrafficError::Config(format!("profile {}: {e}", i + 1)))?,
            );
        }
        if profiles.is_empty() {
            return Err(TrafficError::Config("scenario has no profiles".into()));
        }
        Ok((config, profiles))
    }
}

impl ProfileEntry {
    pub fn to_profile(&self) -> Result<ClassProfile, TrafficError> {
        let chunked =
            self.chunk_size.is_some() || self.chunk_period.is_some() || self.packet_size.is_some();
        let framed = self.frame_rate.is_some() || self.packet_mean.is_some();
        let shape = match (chunked, framed) {
            (true, false) => TrafficShape::Chunked {
                chunk_size: self
                    .chunk_size
                    .ok_or_else(|| TrafficError::Config("chunk_size missing".into()))?,
                chunk_period: self
                    .chunk_period
                    .ok_or_else(|| TrafficError::Config("chunk_period missing".into()))?,
                packet_size: self
                    .packet_size
                    .ok_or_else(|| TrafficError::Config("packet_size missing".into()))?,
                packet_jitter: self.packet_jitter.unwrap_or(0),
                chunk_jitter: self.chunk_jitter.unwrap_or(0.0),
            },
            (false, true) => TrafficShape::Framed {
                frame_rate: self
                    .frame_rate
                    .ok_or_else(|| TrafficError::Config("frame_rate missing".into()))?,
                packet_mean: self
                    .packet_mean
                    .ok_or_else(|| TrafficError::Config("packet_mean missing".into()))?,
                packet_jitter: self.packet_jitter.unwrap_or(0),
                ppf_jitter: self.ppf_jitter.unwrap_or(0),
                aux: self.aux.clone(),
            },
            (true, true) => {
                return Err(TrafficError::Config(
                    "profile mixes chunked and framed fields".into(),
                ))
            }
            (false, false) => {
                return Err(TrafficError::Config(
                    "profile has neither chunked nor framed fields".into(),
                ))
            }
        };
        let profile = ClassProfile {
            class: self.class,
            mean_bitrate: self.mean_bitrate,
            line_rate: self.line_rate.unwrap_or(DEFAULT_LINE_RATE),
            line_jitter: self.line_jitter.unwrap_or(0.0),
            shape,
        };
        profile.validate()?;
        Ok(profile)
    }
}
