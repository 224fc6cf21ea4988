//! Agent-initiated network management protocol (update-driven instead of
//! polled), plus the machinery needed to measure it: a secure packet
//! pipeline, agent and manager-pool state machines, a deterministic
//! discrete-event network, and an SNMP-style polling baseline to compare
//! against.

pub mod agent;
pub mod baseline;
pub mod manager;
pub mod secure_channel;
pub mod simnet;
pub mod wire;

pub use agent::{AgentConfig, AgentEvent, AgentState, MetricSpec, MetricState, Zone};
pub use manager::{AlertReason, ConsoleAlert, ManagerPoolConfig, ManagerPoolState};
pub use secure_channel::{ChannelConfig, ChannelKeys, SecureEnvelope};
pub use simnet::{EventKind, LinkModel, Network, SimEvent, SimStats};
pub use wire::{Message, MessageHeader, MessageKind, MetricRecord};
