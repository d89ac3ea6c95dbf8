//! satflow: classify encrypted traffic flows from packet sizes and timings,
//! evaluate classifier generalization across emulated satellite channels,
//! rank features by information-theoretic relevance, and verify flows against
//! declared path QoS profiles.

pub mod eval;
pub mod features;
pub mod flow;
pub mod infotheory;
pub mod ingest;
pub mod ml;
pub mod qos;
pub mod traffic;

pub use flow::{
    assemble_flows, window_flow, Direction, Flow, FlowError, FlowKey, FlowWindow, PacketRecord,
    TrafficClass, WindowSpec,
};
