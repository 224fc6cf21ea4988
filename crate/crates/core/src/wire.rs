//! Binary codec for the seven protocol message kinds.
//!
//! Wire layout (all integers big-endian):
//!
//! ```text
//! Header, 26 bytes:
//!   version[1]=0x01 | kind[1] | flags[1] | reserved[1]=0x00
//!   agent_id[8] | sequence[4] | timestamp_ms[8] | payload_len[2]
//! Payload: payload_len bytes, a run of 28-byte metric records:
//!   object_id[4] | value_milli[8, two's complement] |
//!   interval_packets_sent[8] | interval_packets_received[8]
//! ```
//!
//! Metric values are signed milli-units; the two packet counters are
//! per-reporting-interval deltas, never running totals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Serialized header size in bytes.
pub const HEADER_LEN: usize = 26;
/// Serialized metric record size in bytes.
pub const RECORD_LEN: usize = 28;
/// Maximum records per message (payload_len must fit in 16 bits).
pub const MAX_RECORDS: usize = u16::MAX as usize / RECORD_LEN;

/// Reply expected for this message.
pub const FLAG_ACK_REQUIRED: u8 = 0b0000_0001;
/// Message is a retransmission of an earlier one (same sequence).
pub const FLAG_RETRANSMISSION: u8 = 0b0000_0010;

pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("input shorter than the declared message")]
    Truncated,
    #[error("unsupported wire version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown message kind {0:#04x}")]
    UnknownKind(u8),
    #[error("payload length inconsistent with a whole number of records")]
    LengthMismatch,
    #[error("{kind:?} carries a payload it must not, or is missing one it must have")]
    ArityViolation { kind: MessageKind },
    #[error("payload exceeds the 16-bit length field")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    RegularUpdate,
    Trap,
    ActionSet,
    Get,
    Advertisement,
    Registration,
    TrapReply,
}

impl MessageKind {
    pub fn code(self) -> u8 {
        match self {
            MessageKind::RegularUpdate => 0x01,
            MessageKind::Trap => 0x02,
            MessageKind::ActionSet => 0x03,
            MessageKind::Get => 0x04,
            MessageKind::Advertisement => 0x05,
            MessageKind::Registration => 0x06,
            MessageKind::TrapReply => 0x07,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0x01 => MessageKind::RegularUpdate,
            0x02 => MessageKind::Trap,
            0x03 => MessageKind::ActionSet,
            0x04 => MessageKind::Get,
            0x05 => MessageKind::Advertisement,
            0x06 => MessageKind::Registration,
            0x07 => MessageKind::TrapReply,
            _ => return None,
        })
    }

    /// Stable display name, used as the stats key for per-kind counts.
    pub fn name(self) -> &'static str {
        match self {
            MessageKind::RegularUpdate => "RegularUpdate",
            MessageKind::Trap => "Trap",
            MessageKind::ActionSet => "ActionSet",
            MessageKind::Get => "Get",
            MessageKind::Advertisement => "Advertisement",
            MessageKind::Registration => "Registration",
            MessageKind::TrapReply => "TrapReply",
        }
    }

    /// Kinds sent by agents; everything else originates at managers.
    pub fn agent_originated(self) -> bool {
        matches!(
            self,
            MessageKind::RegularUpdate | MessageKind::Trap | MessageKind::Advertisement
        )
    }

    /// Record-payload arity rule: `Some(true)` requires records,
    /// `Some(false)` forbids them, `None` allows either (ActionSet).
    fn requires_records(self) -> Option<bool> {
        match self {
            MessageKind::RegularUpdate | MessageKind::Trap => Some(true),
            MessageKind::Get
            | MessageKind::Advertisement
            | MessageKind::Registration
            | MessageKind::TrapReply => Some(false),
            MessageKind::ActionSet => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageHeader {
    pub kind: MessageKind,
    pub flags: u8,
    pub agent_id: u64,
    /// Per-agent, per-direction monotonic counter.
    pub sequence: u32,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub object_id: u32,
    /// Metric value in signed milli-units.
    pub value_milli: i64,
    /// Packets sent during the reporting interval (delta, not a total).
    pub interval_packets_sent: u64,
    /// Packets received during the reporting interval (delta, not a total).
    pub interval_packets_received: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub header: MessageHeader,
    pub records: Vec<MetricRecord>,
}

impl Message {
    pub fn new(header: MessageHeader, records: Vec<MetricRecord>) -> Self {
        Message { header, records }
    }

    pub fn kind(&self) -> MessageKind {
        self.header.kind
    }

    pub fn is_retransmission(&self) -> bool {
        self.header.flags & FLAG_RETRANSMISSION != 0
    }
}

fn check_arity(kind: MessageKind, record_count: usize) -> Result<(), WireError> {
    match kind.requires_records() {
        Some(true) if record_count == 0 => Err(WireError::ArityViolation { kind }),
        Some(false) if record_count != 0 => Err(WireError::ArityViolation { kind }),
        _ => Ok(()),
    }
}

pub fn encode_message(msg: &Message) -> Result<Vec<u8>, WireError> {
    check_arity(msg.header.kind, msg.records.len())?;
    if msg.records.len() > MAX_RECORDS {
        return Err(WireError::Overflow);
    }
    let payload_len = msg.records.len() * RECORD_LEN;
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
    out.push(WIRE_VERSION);
    out.push(msg.header.kind.code());
    out.push(msg.header.flags);
    out.push(0); // reserved
    out.extend_from_slice(&msg.header.agent_id.to_be_bytes());
    out.extend_from_slice(&msg.header.sequence.to_be_bytes());
    out.extend_from_slice(&msg.header.timestamp_ms.to_be_bytes());
    out.extend_from_slice(&(payload_len as u16).to_be_bytes());
    for rec in &msg.records {
        out.extend_from_slice(&rec.object_id.to_be_bytes());
        out.extend_from_slice(&rec.value_milli.to_be_bytes());
        out.extend_from_slice(&rec.interval_packets_sent.to_be_bytes());
        out.extend_from_slice(&rec.interval_packets_received.to_be_bytes());
    }
    Ok(out)
}

pub fn decode_message(bytes: &[u8]) -> Result<Message, WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated);
    }
    if bytes[0] != WIRE_VERSION {
        return Err(WireError::BadVersion(bytes[0]));
    }
    let kind = MessageKind::from_code(bytes[1]).ok_or(WireError::UnknownKind(bytes[1]))?;
    let flags = bytes[2];
    // bytes[3] is reserved; nonzero tolerated on decode.
    let agent_id = u64::from_be_bytes(bytes[4..12].try_into().unwrap());
    let sequence = u32::from_be_bytes(bytes[12..16].try_into().unwrap());
    let timestamp_ms = u64::from_be_bytes(bytes[16..24].try_into().unwrap());
    let payload_len = u16::from_be_bytes(bytes[24..26].try_into().unwrap()) as usize;

    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(WireError::Truncated);
    }
    if payload.len() > payload_len {
        return Err(WireError::LengthMismatch);
    }
    if payload_len % RECORD_LEN != 0 {
        return Err(WireError::LengthMismatch);
    }
    let record_count = payload_len / RECORD_LEN;
    check_arity(kind, record_count)?;

    let mut records = Vec::with_capacity(record_count);
    for chunk in payload.chunks_exact(RECORD_LEN) {
        records.push(MetricRecord {
            object_id: u32::from_be_bytes(chunk[0..4].try_into().unwrap()),
            value_milli: i64::from_be_bytes(chunk[4..12].try_into().unwrap()),
            interval_packets_sent: u64::from_be_bytes(chunk[12..20].try_into().unwrap()),
            interval_packets_received: u64::from_be_bytes(chunk[20..28].try_into().unwrap()),
        });
    }

    Ok(Message {
        header: MessageHeader {
            kind,
            flags,
            agent_id,
            sequence,
            timestamp_ms,
        },
        records,
    })
}
