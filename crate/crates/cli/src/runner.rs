//! Scenario driver: wires agents, the manager pool, and the secure channel
//! onto the simulated network and runs the event loop to completion.
//!
//! Topology: node 0 is the manager pool, agents occupy nodes `1..=count`.
//! Every protocol message travels as secure envelopes, one per datagram;
//! the manager batches arrivals and answers when the simulated clock is
//! about to advance, so traps queued behind regular updates still drain
//! first within their batch.

use std::collections::{BTreeMap, BTreeSet};

use cnmm_core::agent::{AgentConfig, AgentError, AgentEvent, AgentState, MetricSpec};
use cnmm_core::baseline::{self, BaselineError, PollerConfig, TrafficProfile};
use cnmm_core::manager::{ManagerPoolConfig, ManagerPoolState};
use cnmm_core::secure_channel::{self, ChannelConfig, ChannelKeys, SecureEnvelope};
use cnmm_core::simnet::{EventKind, Network, NodeId};
use cnmm_core::wire::{Message, MessageKind};
use thiserror::Error;

use crate::report::{
    BaselineSummary, CnmmSummary, LatencySummary, RunReport, REPORT_SCHEMA_VERSION,
};
use crate::scenario::{InjectionKind, Scenario};

pub const MANAGER_NODE: NodeId = 0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("baseline run failed: {0}")]
    Baseline(#[from] BaselineError),
}

/// One datagram-level send, as observed at the sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub at: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MessageKind,
    pub sequence: u32,
    pub retransmission: bool,
}

/// Full outcome of a run: the report plus the live state machines, which
/// integration tests inspect directly.
pub struct RunOutcome {
    pub report: RunReport,
    pub trace: Vec<TraceEntry>,
    pub agents: BTreeMap<u64, AgentState>,
    pub pool: ManagerPoolState,
}

struct FailureWindow {
    fail_at: u64,
    recover_at: Option<u64>,
}

impl FailureWindow {
    fn covers(&self, now: u64) -> bool {
        now >= self.fail_at && self.recover_at.map_or(true, |r| now < r)
    }
}

/// Mutable driver state shared across event handlers.
struct Driver {
    cfg: ChannelConfig,
    keys: BTreeMap<u64, ChannelKeys>,
    agents: BTreeMap<u64, AgentState>,
    pool: ManagerPoolState,
    failures: BTreeMap<u64, Vec<FailureWindow>>,
    trace: Vec<TraceEntry>,
    /// First-transmission time of each trap, keyed by (agent, sequence).
    trap_sent_at: BTreeMap<(u64, u32), u64>,
    trap_ack_latency_ms: Vec<u64>,
    /// Partial multi-envelope messages keyed by source node.
    reassembly: BTreeMap<NodeId, BTreeMap<u16, SecureEnvelope>>,
    /// (node, at) pairs with a timer already queued; avoids duplicates.
    timer_slots: BTreeSet<(NodeId, u64)>,
    channel_errors: u64,
    skipped_injections: u64,
    dropped_at_failed_node: u64,
}

impl Driver {
    fn is_failed(&self, node: NodeId, now: u64) -> bool {
        self.failures
            .get(&node)
            .is_some_and(|ws| ws.iter().any(|w| w.covers(now)))
    }

    fn recovers_at(&self, node: NodeId, now: u64) -> bool {
        self.failures
            .get(&node)
            .is_some_and(|ws| ws.iter().any(|w| w.recover_at == Some(now)))
    }

    fn send(&mut self, net: &mut Network, src: NodeId, dst: NodeId, msg: &Message, now: u64) {
        net.stats.note_kind(msg.header.kind.name());
        self.trace.push(TraceEntry {
            at: now,
            src,
            dst,
            kind: msg.header.kind,
            sequence: msg.header.sequence,
            retransmission: msg.is_retransmission(),
        });
        let agent_id = if src == MANAGER_NODE { dst } else { src };
        let keys = &self.keys[&agent_id];
        let envelopes =
            secure_channel::wrap_message(msg, keys, &self.cfg).expect("state machines emit encodable messages");
        for env in envelopes {
            net.schedule_send(src, dst, env.to_bytes(), now)
                .expect("all scenario nodes exist");
        }
    }

    /// Track trap first-send times, then transmit the batch.
    fn send_from_agent(&mut self, net: &mut Network, agent_id: u64, msgs: Vec<Message>, now: u64) {
        for msg in msgs {
            if msg.header.kind == MessageKind::Trap && !msg.is_retransmission() {
                self.trap_sent_at.insert((agent_id, msg.header.sequence), now);
            }
            self.send(net, agent_id, MANAGER_NODE, &msg, now);
        }
    }

    /// Parse one datagram from `src` into a message, running reassembly
    /// for multi-envelope transfers. `channel_agent` selects the keys: the
    /// agent endpoint of the link, whichever direction the datagram flows.
    /// `None`: incomplete or rejected.
    fn receive(&mut self, src: NodeId, channel_agent: u64, bytes: &[u8]) -> Option<Message> {
        let env = match SecureEnvelope::from_bytes(bytes) {
            Ok(env) => env,
            Err(_) => {
                self.channel_errors += 1;
                return None;
            }
        };
        let keys = &self.keys[&channel_agent];
        let batch: Vec<SecureEnvelope> = if env.frag_count <= 1 {
            vec![env]
        } else {
            let buf = self.reassembly.entry(src).or_default();
            buf.insert(env.frag_index, env.clone());
            if buf.len() < env.frag_count as usize {
                return None;
            }
            let complete: Vec<SecureEnvelope> = buf.values().cloned().collect();
            self.reassembly.remove(&src);
            complete
        };
        match secure_channel::unwrap_message(&batch, keys, &self.cfg) {
            Ok(msg) => Some(msg),
            Err(_) => {
                self.channel_errors += 1;
                None
            }
        }
    }

    fn ensure_wake(&mut self, net: &mut Network, node: NodeId, at: Option<u64>, now: u64) {
        let Some(at) = at else { return };
        let at = at.max(now);
        if self.timer_slots.insert((node, at)) {
            net.schedule(at, EventKind::TimerFire { node });
        }
    }

    fn wake_agent(&mut self, net: &mut Network, agent_id: u64, now: u64) {
        let at = self.agents[&agent_id].next_wakeup();
        self.ensure_wake(net, agent_id, at, now);
    }

    /// Answer everything batched at the pool and run its liveness probes.
    fn flush_manager(&mut self, net: &mut Network, now: u64) {
        let replies = self.pool.tick(now);
        for msg in replies {
            let dst = msg.header.agent_id;
            self.send(net, MANAGER_NODE, dst, &msg, now);
        }
        let at = self.pool.next_wakeup();
        self.ensure_wake(net, MANAGER_NODE, at, now);
    }
}

fn agent_specs(scenario: &Scenario) -> Vec<MetricSpec> {
    scenario
        .agents
        .metrics
        .iter()
        .map(|m| {
            let spec = MetricSpec::new(m.object_id, m.name.clone(), m.minimum_level, m.threshold_level);
            match m.hysteresis {
                Some(h) => spec.with_hysteresis(h),
                None => spec,
            }
        })
        .collect()
}

fn run_cnmm(scenario: &Scenario) -> (CnmmSummary, Vec<TraceEntry>, BTreeMap<u64, AgentState>, ManagerPoolState) {
    let duration_ms = scenario.duration_s * 1000;
    let mut net = Network::new(scenario.link, scenario.seed, "cnmm");
    net.add_node(MANAGER_NODE);

    let specs = agent_specs(scenario);
    let mut driver = Driver {
        cfg: ChannelConfig {
            max_fragment: scenario.cnmm.max_fragment,
            compression: scenario.cnmm.compression,
            cipher: scenario.cnmm.cipher,
        },
        keys: BTreeMap::new(),
        agents: BTreeMap::new(),
        pool: ManagerPoolState::new(ManagerPoolConfig {
            num_virtual_managers: scenario.cnmm.num_virtual_managers,
            update_interval_expectation_s: scenario.update_interval_expectation_s(),
            get_timeout_s: scenario.cnmm.get_timeout_s,
            deadline_slack: scenario.cnmm.deadline_slack,
            ..Default::default()
        }),
        failures: BTreeMap::new(),
        trace: Vec::new(),
        trap_sent_at: BTreeMap::new(),
        trap_ack_latency_ms: Vec::new(),
        reassembly: BTreeMap::new(),
        timer_slots: BTreeSet::new(),
        channel_errors: 0,
        skipped_injections: 0,
        dropped_at_failed_node: 0,
    };

    for agent_id in 1..=scenario.agents.count {
        net.add_node(agent_id);
        let keys = ChannelKeys::derive(scenario.seed, agent_id);
        let mut config = AgentConfig::new(agent_id, keys.clone());
        config.update_interval_s = scenario.cnmm.update_interval_s;
        config.trap_retry_limit = scenario.cnmm.trap_retry_limit;
        config.trap_retry_backoff_s = scenario.cnmm.trap_retry_backoff_s;
        driver.keys.insert(agent_id, keys);
        driver
            .agents
            .insert(agent_id, AgentState::new(config, specs.clone()));
        driver.timer_slots.insert((agent_id, 0));
        net.schedule(0, EventKind::TimerFire { node: agent_id });
    }

    for inj in &scenario.injections {
        let kind = match inj.kind {
            InjectionKind::Sample { value_milli } => EventKind::SampleInject {
                node: inj.agent_id,
                object_id: inj.object_id,
                value_milli,
            },
            InjectionKind::Traffic { sent, received } => EventKind::TrafficInject {
                node: inj.agent_id,
                object_id: inj.object_id,
                sent,
                received,
            },
        };
        net.schedule(inj.at_ms, kind);
    }
    for f in &scenario.agent_failures {
        driver.failures.entry(f.agent_id).or_default().push(FailureWindow {
            fail_at: f.fail_at_ms,
            recover_at: f.recover_at_ms,
        });
        if let Some(r) = f.recover_at_ms {
            driver.timer_slots.insert((f.agent_id, r));
            net.schedule(r, EventKind::TimerFire { node: f.agent_id });
        }
    }

    while let Some(event) = net.pop_due(duration_ms) {
        let now = event.at;
        match event.kind {
            EventKind::TimerFire { node } if node == MANAGER_NODE => {
                driver.timer_slots.remove(&(node, now));
                // Work happens in the end-of-timestamp flush below.
            }
            EventKind::TimerFire { node } => {
                driver.timer_slots.remove(&(node, now));
                if !driver.is_failed(node, now) {
                    if driver.recovers_at(node, now) {
                        // The deadline aged while the node was down;
                        // restart the cadence instead of emitting a
                        // catch-up burst.
                        driver
                            .agents
                            .get_mut(&node)
                            .expect("scheduled for existing agent")
                            .reset_update_deadline(now);
                    }
                    let msgs = driver
                        .agents
                        .get_mut(&node)
                        .expect("scheduled for existing agent")
                        .tick(now)
                        .expect("tick is infallible below the sequence bound");
                    driver.send_from_agent(&mut net, node, msgs, now);
                    driver.wake_agent(&mut net, node, now);
                }
            }
            EventKind::SampleInject {
                node,
                object_id,
                value_milli,
            } => {
                if driver.is_failed(node, now) {
                    driver.skipped_injections += 1;
                } else {
                    let result = driver
                        .agents
                        .get_mut(&node)
                        .expect("validated agent id")
                        .observe_sample(object_id, value_milli, now);
                    match result {
                        Ok(msgs) => {
                            driver.send_from_agent(&mut net, node, msgs, now);
                            driver.wake_agent(&mut net, node, now);
                        }
                        Err(AgentError::NotRegistered) => driver.skipped_injections += 1,
                        Err(e) => unreachable!("validated object ids: {e}"),
                    }
                }
            }
            EventKind::TrafficInject {
                node,
                object_id,
                sent,
                received,
            } => {
                if driver.is_failed(node, now) {
                    driver.skipped_injections += 1;
                } else {
                    driver
                        .agents
                        .get_mut(&node)
                        .expect("validated agent id")
                        .record_traffic(object_id, sent, received)
                        .expect("validated object ids");
                }
            }
            EventKind::Deliver { src, dst, bytes } => {
                if dst == MANAGER_NODE {
                    if let Some(msg) = driver.receive(src, src, &bytes) {
                        driver.pool.enqueue_message(msg, now);
                    }
                } else if driver.is_failed(dst, now) {
                    driver.dropped_at_failed_node += 1;
                } else if let Some(msg) = driver.receive(src, dst, &bytes) {
                    let ack_latency = (msg.header.kind == MessageKind::TrapReply
                        && driver.agents[&dst].has_pending_trap(msg.header.sequence))
                    .then(|| {
                        let sent_at = driver.trap_sent_at[&(dst, msg.header.sequence)];
                        now - sent_at
                    });
                    if let Some(lat) = ack_latency {
                        driver.trap_ack_latency_ms.push(lat);
                    }
                    let replies = driver
                        .agents
                        .get_mut(&dst)
                        .expect("delivery to existing agent")
                        .handle_message(&msg, now)
                        .expect("manager sends only manager kinds");
                    driver.send_from_agent(&mut net, dst, replies, now);
                    driver.wake_agent(&mut net, dst, now);
                }
            }
        }
        if net.peek_at() != Some(now) {
            driver.flush_manager(&mut net, now);
        }
    }

    let traps_abandoned = driver
        .agents
        .values()
        .flat_map(|a| &a.events)
        .filter(|e| matches!(e, AgentEvent::TrapAbandoned { .. }))
        .count() as u64;
    let traps_pending_at_end = driver
        .agents
        .values()
        .map(|a| a.pending_trap_count() as u64)
        .sum();
    let mut agent_error_stats = cnmm_core::agent::AgentErrorStats::default();
    for a in driver.agents.values() {
        agent_error_stats.unknown_object_writes += a.error_stats.unknown_object_writes;
        agent_error_stats.rejected_writes += a.error_stats.rejected_writes;
        agent_error_stats.unmatched_trap_replies += a.error_stats.unmatched_trap_replies;
    }

    let summary = CnmmSummary {
        total_messages: net.stats.sends,
        stats: net.stats.clone(),
        alerts: driver.pool.alerts.clone(),
        traps_acked: driver.trap_ack_latency_ms.len() as u64,
        traps_abandoned,
        traps_pending_at_end,
        trap_ack_latency_ms: LatencySummary::from_samples(&driver.trap_ack_latency_ms),
        vm_processed: driver.pool.vm_processed().to_vec(),
        manager_drop_stats: driver.pool.drop_stats,
        agent_error_stats,
        channel_errors: driver.channel_errors,
        skipped_injections: driver.skipped_injections,
        dropped_at_failed_node: driver.dropped_at_failed_node,
    };
    (summary, driver.trace, driver.agents, driver.pool)
}

/// Run a validated scenario: the event-driven protocol always, the polling
/// baseline when the scenario configures one.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutcome, RunError> {
    scenario.validate().map_err(RunError::Invalid)?;

    let (cnmm, trace, agents, pool) = run_cnmm(scenario);

    let baseline = match &scenario.baseline {
        None => None,
        Some(b) => {
            let report = baseline::run_polling_scenario(
                scenario.agents.count,
                scenario.link,
                PollerConfig {
                    poll_interval_s: b.poll_interval_s,
                    sweep_gap_ms: b.sweep_gap_ms,
                    reply_delay_ms: b.reply_delay_ms,
                },
                TrafficProfile {
                    bytes_per_sec: b.bytes_per_sec,
                },
                scenario.duration_s,
                scenario.seed,
            )?;
            Some(BaselineSummary {
                total_messages: report.total_messages,
                max_abs_error_bps: report.max_abs_error_bps,
                reply_latency_ms: LatencySummary::from_samples(&report.reply_latency_ms),
                samples: report.samples,
                stats: report.stats,
            })
        }
    };
    let reduction_ratio = baseline
        .as_ref()
        .filter(|b| b.total_messages > 0)
        .map(|b| cnmm.total_messages as f64 / b.total_messages as f64);

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        scenario: scenario.clone(),
        cnmm,
        baseline,
        reduction_ratio,
    };
    Ok(RunOutcome {
        report,
        trace,
        agents,
        pool,
    })
}
