//! Virtualized manager pool: registers agents, stores their updates,
//! acknowledges every accepted message, prioritizes traps, and runs the
//! per-agent liveness timer with a three-probe escalation to the console.
//!
//! Acknowledgements (Registration, ActionSet, TrapReply) echo the sequence
//! number of the agent message they answer; probe Gets carry their own
//! per-agent outbound counter.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{Message, MessageHeader, MessageKind, MetricRecord, FLAG_ACK_REQUIRED};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ManagerError {
    #[error("agent {0} is not registered")]
    UnknownAgent(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManagerPoolConfig {
    pub num_virtual_managers: usize,
    pub update_interval_expectation_s: u64,
    /// Spacing between successive probe Gets to a silent agent.
    pub get_timeout_s: u64,
    /// Grace multiplier on the expected update interval before probing.
    pub deadline_slack: f64,
    /// Per-object record history bound.
    pub history_cap: usize,
}

impl Default for ManagerPoolConfig {
    fn default() -> Self {
        ManagerPoolConfig {
            num_virtual_managers: 4,
            update_interval_expectation_s: 300,
            get_timeout_s: 5,
            deadline_slack: 1.5,
            history_cap: 1024,
        }
    }
}

pub const MAX_GET_RETRIES: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlertReason {
    AgentUnresponsive,
    TrapReceived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsoleAlert {
    pub agent_id: u64,
    pub reason: AlertReason,
    pub at: u64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AgentRegistryEntry {
    pub agent_id: u64,
    pub last_heard: u64,
    pub update_deadline: u64,
    pub get_retries_sent: u8,
    last_get_at: Option<u64>,
    /// Set after an unresponsive alert; probing resumes when heard again.
    probe_paused: bool,
    last_seq_seen: u32,
    out_seq: u32,
    history: BTreeMap<u32, VecDeque<MetricRecord>>,
}

/// Read-only view of one agent for operators and reports.
#[derive(Debug, Clone, Serialize)]
pub struct AgentStatus {
    pub agent_id: u64,
    pub last_heard: u64,
    pub get_retries_sent: u8,
    pub recent_records: BTreeMap<u32, Vec<MetricRecord>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolDropStats {
    pub unknown_agent: u64,
    pub duplicate_sequence: u64,
    pub unexpected_kind: u64,
}

#[derive(Debug, Default)]
struct WorkQueue {
    traps: VecDeque<Message>,
    regular: VecDeque<Message>,
}

impl WorkQueue {
    fn push(&mut self, msg: Message) {
        if msg.header.kind == MessageKind::Trap {
            self.traps.push_back(msg);
        } else {
            self.regular.push_back(msg);
        }
    }

    fn pop(&mut self) -> Option<Message> {
        self.traps.pop_front().or_else(|| self.regular.pop_front())
    }
}

#[derive(Debug)]
pub struct ManagerPoolState {
    pub config: ManagerPoolConfig,
    registry: BTreeMap<u64, AgentRegistryEntry>,
    queue: WorkQueue,
    pub alerts: Vec<ConsoleAlert>,
    rr_cursor: usize,
    vm_processed: Vec<u64>,
    pub drop_stats: PoolDropStats,
}

impl ManagerPoolState {
    pub fn new(config: ManagerPoolConfig) -> Self {
        assert!(config.num_virtual_managers >= 1);
        let vms = config.num_virtual_managers;
        ManagerPoolState {
            config,
            registry: BTreeMap::new(),
            queue: WorkQueue::default(),
            alerts: Vec::new(),
            rr_cursor: 0,
            vm_processed: vec![0; vms],
            drop_stats: PoolDropStats::default(),
        }
    }

    pub fn registry_len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_registered(&self, agent_id: u64) -> bool {
        self.registry.contains_key(&agent_id)
    }

    pub fn vm_processed(&self) -> &[u64] {
        &self.vm_processed
    }

    fn deadline_after(&self, now: u64) -> u64 {
        let grace =
            (self.config.update_interval_expectation_s * 1000) as f64 * self.config.deadline_slack;
        now + grace as u64
    }

    /// Round-robin assignment of one message to a virtual-manager worker.
    pub fn dispatch(&mut self, _msg: &Message) -> usize {
        let vm = self.rr_cursor;
        self.rr_cursor = (self.rr_cursor + 1) % self.config.num_virtual_managers;
        self.vm_processed[vm] += 1;
        vm
    }

    /// Validate and queue one authenticated agent message. Returns whether
    /// the message was accepted (false: dropped and counted).
    pub fn enqueue_message(&mut self, msg: Message, now: u64) -> bool {
        if !msg.header.kind.agent_originated() {
            self.drop_stats.unexpected_kind += 1;
            return false;
        }
        let agent_id = msg.header.agent_id;
        let deadline = self.deadline_after(now);
        match self.registry.get_mut(&agent_id) {
            None => {
                if msg.header.kind != MessageKind::Advertisement {
                    self.drop_stats.unknown_agent += 1;
                    return false;
                }
                let mut entry = AgentRegistryEntry {
                    agent_id,
                    last_heard: now,
                    update_deadline: 0,
                    get_retries_sent: 0,
                    last_get_at: None,
                    probe_paused: false,
                    last_seq_seen: msg.header.sequence,
                    out_seq: 0,
                    history: BTreeMap::new(),
                };
                entry.update_deadline = deadline;
                self.registry.insert(agent_id, entry);
            }
            Some(entry) => {
                if msg.header.sequence <= entry.last_seq_seen {
                    self.drop_stats.duplicate_sequence += 1;
                    return false;
                }
                entry.last_seq_seen = msg.header.sequence;
                entry.last_heard = now;
                entry.get_retries_sent = 0;
                entry.last_get_at = None;
                entry.probe_paused = false;
                entry.update_deadline = deadline;
            }
        }
        self.queue.push(msg);
        true
    }

    /// Drain the work queue, traps first, producing one acknowledgement per
    /// accepted message.
    pub fn drain(&mut self, now: u64) -> Vec<Message> {
        let mut out = Vec::new();
        while let Some(msg) = self.queue.pop() {
            self.dispatch(&msg);
            let agent_id = msg.header.agent_id;
            let reply_kind = match msg.header.kind {
                MessageKind::Advertisement => MessageKind::Registration,
                MessageKind::RegularUpdate => MessageKind::ActionSet,
                MessageKind::Trap => MessageKind::TrapReply,
                _ => unreachable!("only agent kinds are queued"),
            };
            if !msg.records.is_empty() {
                let cap = self.config.history_cap;
                if let Some(entry) = self.registry.get_mut(&agent_id) {
                    for rec in &msg.records {
                        let ring = entry.history.entry(rec.object_id).or_default();
                        if ring.len() == cap {
                            ring.pop_front();
                        }
                        ring.push_back(*rec);
                    }
                }
            }
            if msg.header.kind == MessageKind::Trap {
                self.alerts.push(ConsoleAlert {
                    agent_id,
                    reason: AlertReason::TrapReceived,
                    at: now,
                    detail: format!(
                        "trap seq {} object {}",
                        msg.header.sequence,
                        msg.records.first().map(|r| r.object_id).unwrap_or(0)
                    ),
                });
            }
            out.push(Message::new(
                MessageHeader {
                    kind: reply_kind,
                    flags: 0,
                    agent_id,
                    // Acknowledgements echo the acknowledged sequence.
                    sequence: msg.header.sequence,
                    timestamp_ms: now,
                },
                vec![],
            ));
        }
        out
    }

    /// Validate, queue, and immediately process one message.
    pub fn handle_message(&mut self, msg: Message, now: u64) -> Vec<Message> {
        if self.enqueue_message(msg, now) {
            self.drain(now)
        } else {
            Vec::new()
        }
    }

    fn probe(&mut self, now: u64) -> Vec<Message> {
        let get_timeout_ms = self.config.get_timeout_s * 1000;
        let mut out = Vec::new();
        let mut alerts = Vec::new();
        for entry in self.registry.values_mut() {
            if entry.probe_paused {
                continue;
            }
            let due = match entry.last_get_at {
                None => now >= entry.update_deadline,
                Some(sent_at) => now >= sent_at + get_timeout_ms,
            };
            if !due {
                continue;
            }
            if entry.get_retries_sent < MAX_GET_RETRIES {
                entry.get_retries_sent += 1;
                entry.last_get_at = Some(now);
                let seq = entry.out_seq;
                entry.out_seq += 1;
                out.push(Message::new(
                    MessageHeader {
                        kind: MessageKind::Get,
                        flags: FLAG_ACK_REQUIRED,
                        agent_id: entry.agent_id,
                        sequence: seq,
                        timestamp_ms: now,
                    },
                    vec![],
                ));
            } else {
                // Third probe unanswered: alert once, stop probing until
                // the agent is heard again.
                entry.probe_paused = true;
                alerts.push(ConsoleAlert {
                    agent_id: entry.agent_id,
                    reason: AlertReason::AgentUnresponsive,
                    at: now,
                    detail: format!("no reply to {MAX_GET_RETRIES} status probes"),
                });
            }
        }
        self.alerts.extend(alerts);
        out
    }

    /// Periodic work: drain queued messages, then run liveness probing.
    pub fn tick(&mut self, now: u64) -> Vec<Message> {
        let mut out = self.drain(now);
        out.extend(self.probe(now));
        out
    }

    /// Earliest simulated time at which `tick` has probing work to do.
    pub fn next_wakeup(&self) -> Option<u64> {
        let get_timeout_ms = self.config.get_timeout_s * 1000;
        self.registry
            .values()
            .filter(|e| !e.probe_paused)
            .map(|e| match e.last_get_at {
                None => e.update_deadline,
                Some(sent_at) => sent_at + get_timeout_ms,
            })
            .min()
    }

    pub fn query_agent_status(&self, agent_id: u64) -> Result<AgentStatus, ManagerError> {
        let entry = self
            .registry
            .get(&agent_id)
            .ok_or(ManagerError::UnknownAgent(agent_id))?;
        Ok(AgentStatus {
            agent_id,
            last_heard: entry.last_heard,
            get_retries_sent: entry.get_retries_sent,
            recent_records: entry
                .history
                .iter()
                .map(|(k, v)| (*k, v.iter().copied().collect()))
                .collect(),
        })
    }
}
