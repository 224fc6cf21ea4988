//! Managed-node state machine: holds the metric database, watches
//! performance levels, and originates all regular traffic.
//!
//! Level geometry: metrics are headroom-oriented, lower is worse, and
//! `minimum_level > threshold_level`. Dropping to the minimum level emits a
//! regular update; dropping to the threshold emits a trap. A metric re-arms
//! only once its value climbs back above `minimum_level + hysteresis`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::secure_channel::ChannelKeys;
use crate::wire::{
    Message, MessageHeader, MessageKind, MetricRecord, FLAG_ACK_REQUIRED, FLAG_RETRANSMISSION,
};

/// Writes to `object_id | ACTION_SET_MINIMUM_BIT` target a metric's
/// minimum level; plain object ids target its threshold level.
pub const ACTION_SET_MINIMUM_BIT: u32 = 0x8000_0000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent already holds a registration")]
    AlreadyRegistered,
    #[error("agent is not registered")]
    NotRegistered,
    #[error("unknown object id {0}")]
    UnknownObject(u32),
    #[error("outbound sequence space exhausted")]
    SequenceExhausted,
    #[error("agent cannot receive agent-originated kind {0:?}")]
    UnexpectedKind(MessageKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub object_id: u32,
    pub name: String,
    /// Milli-units; dropping to this level emits a regular update.
    pub minimum_level: i64,
    /// Milli-units; dropping to this level emits a trap. Strictly below
    /// the minimum level.
    pub threshold_level: i64,
    /// Re-arm band above the minimum level, milli-units.
    pub hysteresis: i64,
}

impl MetricSpec {
    /// Hysteresis defaults to 5% of the minimum-threshold span.
    pub fn new(object_id: u32, name: impl Into<String>, minimum_level: i64, threshold_level: i64) -> Self {
        assert!(minimum_level > threshold_level, "minimum must sit above threshold");
        MetricSpec {
            object_id,
            name: name.into(),
            minimum_level,
            threshold_level,
            hysteresis: (minimum_level - threshold_level) / 20,
        }
    }

    pub fn with_hysteresis(mut self, hysteresis: i64) -> Self {
        assert!(hysteresis >= 0);
        self.hysteresis = hysteresis;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    Normal,
    Warned,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricState {
    pub spec: MetricSpec,
    pub current_value: i64,
    pub zone: Zone,
    /// Packet tallies since the last report; drained into interval deltas.
    pub raw_sent_count: u64,
    pub raw_received_count: u64,
}

impl MetricState {
    fn new(spec: MetricSpec) -> Self {
        MetricState {
            current_value: spec.minimum_level,
            spec,
            zone: Zone::Normal,
            raw_sent_count: 0,
            raw_received_count: 0,
        }
    }

    /// Snapshot the metric as a record and reset the interval tallies.
    fn drain_record(&mut self) -> MetricRecord {
        let rec = MetricRecord {
            object_id: self.spec.object_id,
            value_milli: self.current_value,
            interval_packets_sent: self.raw_sent_count,
            interval_packets_received: self.raw_received_count,
        };
        self.raw_sent_count = 0;
        self.raw_received_count = 0;
        rec
    }
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub agent_id: u64,
    pub update_interval_s: u64,
    pub trap_retry_limit: u32,
    /// Initial retry spacing; doubles after each retransmission.
    pub trap_retry_backoff_s: u64,
    pub keys: ChannelKeys,
}

impl AgentConfig {
    pub fn new(agent_id: u64, keys: ChannelKeys) -> Self {
        AgentConfig {
            agent_id,
            update_interval_s: 300,
            trap_retry_limit: 5,
            trap_retry_backoff_s: 2,
            keys,
        }
    }
}

/// Spacing between advertisements while no registration has arrived.
pub const READVERTISE_INTERVAL_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentEvent {
    TrapAbandoned { object_id: u32, sequence: u32, at: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentErrorStats {
    pub unknown_object_writes: u64,
    pub rejected_writes: u64,
    pub unmatched_trap_replies: u64,
}

#[derive(Debug, Clone)]
struct PendingTrap {
    msg: Message,
    retries_left: u32,
    next_retry_at: u64,
    backoff_ms: u64,
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub config: AgentConfig,
    metrics: BTreeMap<u32, MetricState>,
    pub registered: bool,
    next_update_deadline: u64,
    next_advertise_at: u64,
    pending_traps: BTreeMap<u32, PendingTrap>,
    seq_out: u32,
    pub events: Vec<AgentEvent>,
    pub error_stats: AgentErrorStats,
}

impl AgentState {
    pub fn new(config: AgentConfig, specs: Vec<MetricSpec>) -> Self {
        let metrics = specs
            .into_iter()
            .map(|s| (s.object_id, MetricState::new(s)))
            .collect();
        AgentState {
            config,
            metrics,
            registered: false,
            next_update_deadline: u64::MAX,
            next_advertise_at: 0,
            pending_traps: BTreeMap::new(),
            seq_out: 0,
            events: Vec::new(),
            error_stats: AgentErrorStats::default(),
        }
    }

    pub fn metric(&self, object_id: u32) -> Option<&MetricState> {
        self.metrics.get(&object_id)
    }

    pub fn metrics(&self) -> impl Iterator<Item = &MetricState> {
        self.metrics.values()
    }

    pub fn pending_trap_count(&self) -> usize {
        self.pending_traps.len()
    }

    pub fn has_pending_trap(&self, sequence: u32) -> bool {
        self.pending_traps.contains_key(&sequence)
    }

    /// Restart the update timer from `now`, e.g. after the node was down
    /// long enough for the deadline to fall into the past.
    pub fn reset_update_deadline(&mut self, now: u64) {
        if self.registered {
            self.next_update_deadline = now + self.update_interval_ms();
        }
    }

    /// Sum of interval tallies not yet drained into any report.
    pub fn undrained_tallies(&self) -> (u64, u64) {
        self.metrics.values().fold((0, 0), |(s, r), m| {
            (s + m.raw_sent_count, r + m.raw_received_count)
        })
    }

    fn next_seq(&mut self) -> Result<u32, AgentError> {
        let seq = self.seq_out;
        self.seq_out = self.seq_out.checked_add(1).ok_or(AgentError::SequenceExhausted)?;
        Ok(seq)
    }

    fn header(&mut self, kind: MessageKind, flags: u8, now: u64) -> Result<MessageHeader, AgentError> {
        Ok(MessageHeader {
            kind,
            flags,
            agent_id: self.config.agent_id,
            sequence: self.next_seq()?,
            timestamp_ms: now,
        })
    }

    fn update_interval_ms(&self) -> u64 {
        self.config.update_interval_s * 1000
    }

    /// Boot-time discovery message. Re-advertising before a registration
    /// arrives is permitted (the tick drives it on a fixed cadence).
    pub fn advertise(&mut self, now: u64) -> Result<Message, AgentError> {
        if self.registered {
            return Err(AgentError::AlreadyRegistered);
        }
        let header = self.header(MessageKind::Advertisement, FLAG_ACK_REQUIRED, now)?;
        self.next_advertise_at = now + READVERTISE_INTERVAL_MS;
        Ok(Message::new(header, vec![]))
    }

    /// Feed one metric sample. Emits a regular update on a minimum-level
    /// crossing, a trap on a threshold crossing; a sample crossing both
    /// emits only the trap.
    pub fn observe_sample(
        &mut self,
        object_id: u32,
        value_milli: i64,
        now: u64,
    ) -> Result<Vec<Message>, AgentError> {
        if !self.registered {
            return Err(AgentError::NotRegistered);
        }
        let (min, thr, hyst, zone) = {
            let state = self
                .metrics
                .get_mut(&object_id)
                .ok_or(AgentError::UnknownObject(object_id))?;
            state.current_value = value_milli;
            (
                state.spec.minimum_level,
                state.spec.threshold_level,
                state.spec.hysteresis,
                state.zone,
            )
        };

        let mut out = Vec::new();
        if matches!(zone, Zone::Normal | Zone::Warned) && value_milli <= thr {
            let record = self.metrics.get_mut(&object_id).expect("checked").drain_record();
            self.metrics.get_mut(&object_id).expect("checked").zone = Zone::Critical;
            let header = self.header(MessageKind::Trap, FLAG_ACK_REQUIRED, now)?;
            let msg = Message::new(header, vec![record]);
            let backoff_ms = self.config.trap_retry_backoff_s * 1000;
            self.pending_traps.insert(
                msg.header.sequence,
                PendingTrap {
                    msg: msg.clone(),
                    retries_left: self.config.trap_retry_limit,
                    next_retry_at: now + backoff_ms,
                    backoff_ms,
                },
            );
            out.push(msg);
        } else if zone == Zone::Normal && value_milli <= min {
            let record = self.metrics.get_mut(&object_id).expect("checked").drain_record();
            self.metrics.get_mut(&object_id).expect("checked").zone = Zone::Warned;
            let header = self.header(MessageKind::RegularUpdate, 0, now)?;
            out.push(Message::new(header, vec![record]));
        }
        // Re-arm once the value recovers past the hysteresis band.
        if value_milli >= min + hyst {
            self.metrics.get_mut(&object_id).expect("checked").zone = Zone::Normal;
        }
        Ok(out)
    }

    /// Accumulate raw traffic tallies; saturating, drained at each report.
    pub fn record_traffic(
        &mut self,
        object_id: u32,
        sent: u64,
        received: u64,
    ) -> Result<(), AgentError> {
        let state = self
            .metrics
            .get_mut(&object_id)
            .ok_or(AgentError::UnknownObject(object_id))?;
        state.raw_sent_count = state.raw_sent_count.saturating_add(sent);
        state.raw_received_count = state.raw_received_count.saturating_add(received);
        Ok(())
    }

    fn full_update(&mut self, now: u64) -> Result<Message, AgentError> {
        let records: Vec<MetricRecord> = self
            .metrics
            .values_mut()
            .map(MetricState::drain_record)
            .collect();
        let header = self.header(MessageKind::RegularUpdate, 0, now)?;
        Ok(Message::new(header, records))
    }

    /// Timer-driven work: advertisement cadence while unregistered, the
    /// periodic full update, and trap retransmissions.
    pub fn tick(&mut self, now: u64) -> Result<Vec<Message>, AgentError> {
        let mut out = Vec::new();

        if !self.registered {
            if now >= self.next_advertise_at {
                out.push(self.advertise(now)?);
            }
        } else if now >= self.next_update_deadline {
            out.push(self.full_update(now)?);
            self.next_update_deadline += self.update_interval_ms();
        }

        let due: Vec<u32> = self
            .pending_traps
            .iter()
            .filter(|(_, p)| p.next_retry_at <= now)
            .map(|(seq, _)| *seq)
            .collect();
        for seq in due {
            let pending = self.pending_traps.get_mut(&seq).expect("collected above");
            if pending.retries_left == 0 {
                let object_id = pending.msg.records.first().map(|r| r.object_id).unwrap_or(0);
                self.pending_traps.remove(&seq);
                self.events.push(AgentEvent::TrapAbandoned {
                    object_id,
                    sequence: seq,
                    at: now,
                });
                continue;
            }
            pending.retries_left -= 1;
            pending.backoff_ms *= 2;
            pending.next_retry_at = now + pending.backoff_ms;
            let mut retry = pending.msg.clone();
            retry.header.flags |= FLAG_RETRANSMISSION;
            retry.header.timestamp_ms = now;
            out.push(retry);
        }

        Ok(out)
    }

    /// Earliest simulated time at which `tick` has work to do.
    pub fn next_wakeup(&self) -> Option<u64> {
        let mut next = if self.registered {
            Some(self.next_update_deadline)
        } else {
            Some(self.next_advertise_at)
        };
        for pending in self.pending_traps.values() {
            next = Some(next.map_or(pending.next_retry_at, |n| n.min(pending.next_retry_at)));
        }
        next
    }

    /// React to a decoded, MAC-verified manager message. Authentication is
    /// the channel MAC; anything reaching here is authenticated.
    pub fn handle_message(&mut self, msg: &Message, now: u64) -> Result<Vec<Message>, AgentError> {
        match msg.header.kind {
            MessageKind::Registration => {
                self.registered = true;
                self.next_update_deadline = now + self.update_interval_ms();
                Ok(vec![])
            }
            MessageKind::Get => {
                let reply = self.full_update(now)?;
                self.next_update_deadline = now + self.update_interval_ms();
                Ok(vec![reply])
            }
            MessageKind::ActionSet => {
                // Doubles as the acknowledgement of the last update; any
                // records are level writes.
                for rec in &msg.records {
                    let object_id = rec.object_id & !ACTION_SET_MINIMUM_BIT;
                    let write_minimum = rec.object_id & ACTION_SET_MINIMUM_BIT != 0;
                    match self.metrics.get_mut(&object_id) {
                        None => self.error_stats.unknown_object_writes += 1,
                        Some(state) => {
                            let (min, thr) = if write_minimum {
                                (rec.value_milli, state.spec.threshold_level)
                            } else {
                                (state.spec.minimum_level, rec.value_milli)
                            };
                            if min > thr {
                                state.spec.minimum_level = min;
                                state.spec.threshold_level = thr;
                            } else {
                                self.error_stats.rejected_writes += 1;
                            }
                        }
                    }
                }
                Ok(vec![])
            }
            MessageKind::TrapReply => {
                if self.pending_traps.remove(&msg.header.sequence).is_none() {
                    self.error_stats.unmatched_trap_replies += 1;
                }
                Ok(vec![])
            }
            kind => Err(AgentError::UnexpectedKind(kind)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_keys() -> ChannelKeys {
        ChannelKeys::derive(1, 1)
    }

    fn registered_agent(specs: Vec<MetricSpec>) -> AgentState {
        let mut agent = AgentState::new(AgentConfig::new(1, test_keys()), specs);
        let reg = Message::new(
            MessageHeader {
                kind: MessageKind::Registration,
                flags: 0,
                agent_id: 1,
                sequence: 0,
                timestamp_ms: 0,
            },
            vec![],
        );
        agent.handle_message(&reg, 0).unwrap();
        agent
    }

    fn headroom_spec() -> MetricSpec {
        MetricSpec::new(1, "headroom", 65_000, 40_000)
    }

    #[test]
    fn fresh_agent_advertises_with_sequence_zero() {
        let mut agent = AgentState::new(AgentConfig::new(1, test_keys()), vec![]);
        let msg = agent.advertise(0).unwrap();
        assert_eq!(msg.header.kind, MessageKind::Advertisement);
        assert_eq!(msg.header.sequence, 0);
        assert_ne!(msg.header.flags & FLAG_ACK_REQUIRED, 0);
        assert!(!agent.registered);
    }

    #[test]
    fn readvertisement_uses_next_sequence() {
        let mut agent = AgentState::new(AgentConfig::new(1, test_keys()), vec![]);
        let first = agent.tick(0).unwrap();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].header.sequence, 0);
        // Nothing due before the re-advertise spacing elapses.
        assert!(agent.tick(5_000).unwrap().is_empty());
        let second = agent.tick(10_000).unwrap();
        assert_eq!(second.len(), 1);
        assert_eq!(second[0].header.kind, MessageKind::Advertisement);
        assert_eq!(second[0].header.sequence, 1);
    }

    #[test]
    fn advertise_after_registration_is_error() {
        let mut agent = registered_agent(vec![]);
        assert_eq!(agent.advertise(0), Err(AgentError::AlreadyRegistered));
    }

    #[test]
    fn minimum_crossing_emits_one_update() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        assert!(agent.observe_sample(1, 80_000, 10).unwrap().is_empty());
        let out = agent.observe_sample(1, 60_000, 20).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].header.kind, MessageKind::RegularUpdate);
        assert_eq!(agent.metric(1).unwrap().zone, Zone::Warned);
    }

    #[test]
    fn threshold_crossing_supersedes_update() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        agent.observe_sample(1, 80_000, 10).unwrap();
        let out = agent.observe_sample(1, 30_000, 20).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].header.kind, MessageKind::Trap);
        assert_eq!(agent.metric(1).unwrap().zone, Zone::Critical);
        assert_eq!(agent.pending_trap_count(), 1);
    }

    #[test]
    fn no_refire_without_rearm() {
        let spec = headroom_spec(); // hysteresis = 5% of 25_000 = 1_250
        assert_eq!(spec.hysteresis, 1_250);
        let mut agent = registered_agent(vec![spec]);
        let mut updates = 0;
        for (value, at) in [(60_000, 10), (62_000, 20), (60_000, 30)] {
            updates += agent.observe_sample(1, value, at).unwrap().len();
        }
        assert_eq!(updates, 1);
        // Recovery past min + hysteresis re-arms; the next dip fires again.
        agent.observe_sample(1, 66_250, 40).unwrap();
        assert_eq!(agent.metric(1).unwrap().zone, Zone::Normal);
        assert_eq!(agent.observe_sample(1, 60_000, 50).unwrap().len(), 1);
    }

    #[test]
    fn tallies_drain_and_reset() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        agent.record_traffic(1, 100, 40).unwrap();
        agent.record_traffic(1, 50, 40).unwrap();
        let out = agent.tick(300_000).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].records[0].interval_packets_sent, 150);
        assert_eq!(out[0].records[0].interval_packets_received, 80);
        // Next timer update carries zero deltas.
        let out = agent.tick(600_000).unwrap();
        assert_eq!(out[0].records[0].interval_packets_sent, 0);
    }

    #[test]
    fn tallies_saturate() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        agent.record_traffic(1, u64::MAX - 10, 0).unwrap();
        agent.record_traffic(1, 100, 0).unwrap();
        assert_eq!(agent.metric(1).unwrap().raw_sent_count, u64::MAX);
    }

    #[test]
    fn timer_update_covers_all_metrics() {
        let specs = vec![headroom_spec(), MetricSpec::new(2, "other", 1_000, 500)];
        let mut agent = registered_agent(specs);
        assert!(agent.tick(299_999).unwrap().is_empty());
        let out = agent.tick(300_000).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].records.len(), 2);
    }

    #[test]
    fn trap_retransmits_then_abandons() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        let trap = agent.observe_sample(1, 30_000, 0).unwrap();
        assert_eq!(trap.len(), 1);
        let mut emissions = 1;
        let mut now = 0;
        // Backoff doubles: retries at +2s, +6s, +14s, +30s, +62s.
        for _ in 0..20 {
            now += 100_000;
            let out = agent.tick(now).unwrap();
            emissions += out
                .iter()
                .filter(|m| m.header.kind == MessageKind::Trap)
                .count();
        }
        assert_eq!(emissions, 1 + 5);
        assert_eq!(agent.pending_trap_count(), 0);
        assert_eq!(agent.events.len(), 1);
        assert!(matches!(
            agent.events[0],
            AgentEvent::TrapAbandoned { object_id: 1, .. }
        ));
    }

    #[test]
    fn trap_reply_clears_pending() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        let trap = &agent.observe_sample(1, 30_000, 0).unwrap()[0];
        let seq = trap.header.sequence;
        let reply = Message::new(
            MessageHeader {
                kind: MessageKind::TrapReply,
                flags: 0,
                agent_id: 1,
                sequence: seq,
                timestamp_ms: 5,
            },
            vec![],
        );
        agent.handle_message(&reply, 5).unwrap();
        assert_eq!(agent.pending_trap_count(), 0);
    }

    #[test]
    fn get_triggers_fresh_update_and_resets_deadline() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        agent.record_traffic(1, 7, 3).unwrap();
        let get = Message::new(
            MessageHeader {
                kind: MessageKind::Get,
                flags: FLAG_ACK_REQUIRED,
                agent_id: 1,
                sequence: 0,
                timestamp_ms: 100_000,
            },
            vec![],
        );
        let out = agent.handle_message(&get, 100_000).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].header.kind, MessageKind::RegularUpdate);
        assert_eq!(out[0].records[0].interval_packets_sent, 7);
        // Deadline pushed out: nothing due at the original 300s mark.
        assert!(agent.tick(300_000).unwrap().is_empty());
        assert_eq!(agent.tick(400_000).unwrap().len(), 1);
    }

    #[test]
    fn action_set_writes_levels() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        let set = Message::new(
            MessageHeader {
                kind: MessageKind::ActionSet,
                flags: 0,
                agent_id: 1,
                sequence: 0,
                timestamp_ms: 0,
            },
            vec![
                MetricRecord {
                    object_id: 1,
                    value_milli: 45_000,
                    interval_packets_sent: 0,
                    interval_packets_received: 0,
                },
                MetricRecord {
                    object_id: 1 | ACTION_SET_MINIMUM_BIT,
                    value_milli: 70_000,
                    interval_packets_sent: 0,
                    interval_packets_received: 0,
                },
                MetricRecord {
                    object_id: 99, // absent: counted, not fatal
                    value_milli: 1,
                    interval_packets_sent: 0,
                    interval_packets_received: 0,
                },
            ],
        );
        agent.handle_message(&set, 0).unwrap();
        let spec = &agent.metric(1).unwrap().spec;
        assert_eq!(spec.threshold_level, 45_000);
        assert_eq!(spec.minimum_level, 70_000);
        assert_eq!(agent.error_stats.unknown_object_writes, 1);
    }

    #[test]
    fn write_inverting_levels_rejected() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        let set = Message::new(
            MessageHeader {
                kind: MessageKind::ActionSet,
                flags: 0,
                agent_id: 1,
                sequence: 0,
                timestamp_ms: 0,
            },
            vec![MetricRecord {
                object_id: 1,
                value_milli: 80_000, // threshold above the 65k minimum
                interval_packets_sent: 0,
                interval_packets_received: 0,
            }],
        );
        agent.handle_message(&set, 0).unwrap();
        assert_eq!(agent.metric(1).unwrap().spec.threshold_level, 40_000);
        assert_eq!(agent.error_stats.rejected_writes, 1);
    }

    #[test]
    fn agent_rejects_agent_originated_kinds() {
        let mut agent = registered_agent(vec![]);
        let trap = Message::new(
            MessageHeader {
                kind: MessageKind::Trap,
                flags: 0,
                agent_id: 1,
                sequence: 0,
                timestamp_ms: 0,
            },
            vec![MetricRecord {
                object_id: 1,
                value_milli: 0,
                interval_packets_sent: 0,
                interval_packets_received: 0,
            }],
        );
        assert_eq!(
            agent.handle_message(&trap, 0),
            Err(AgentError::UnexpectedKind(MessageKind::Trap))
        );
    }

    #[test]
    fn sample_before_registration_is_error() {
        let mut agent = AgentState::new(
            AgentConfig::new(1, test_keys()),
            vec![headroom_spec()],
        );
        assert_eq!(
            agent.observe_sample(1, 1, 0),
            Err(AgentError::NotRegistered)
        );
    }

    #[test]
    fn sequences_strictly_increase() {
        let mut agent = registered_agent(vec![headroom_spec()]);
        let mut seqs = Vec::new();
        for t in 1..5u64 {
            for m in agent.tick(t * 300_000).unwrap() {
                seqs.push(m.header.sequence);
            }
        }
        for pair in seqs.windows(2) {
            assert_eq!(pair[1], pair[0] + 1);
        }
    }
}
