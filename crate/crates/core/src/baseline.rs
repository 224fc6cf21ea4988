//! SNMP-style polling baseline: a manager that sweeps every agent on a
//! fixed interval against running 32-bit byte counters.
//!
//! This module deliberately reproduces the polling pathologies it exists
//! to measure: wrapping 32-bit counters corrupt rate estimates on fast
//! links, and a missed poll makes the next estimate divide two intervals
//! of bytes by one nominal interval. Poll request/response payloads are
//! sized like the event-driven protocol's Get (26 bytes) and one-record
//! update (54 bytes) so byte counts compare fairly.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::simnet::{EventKind, LinkModel, Network, NodeId, SimStats};

/// Poll request datagram size (matches the 26-byte Get).
pub const POLL_REQUEST_LEN: usize = 26;
/// Poll response datagram size (matches a one-record update, 54 bytes).
pub const POLL_RESPONSE_LEN: usize = 54;

const MANAGER_NODE: NodeId = 0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("invalid poller config: {0}")]
    ConfigInvalid(String),
}

/// A running 32-bit byte counter, wrapping modulo 2^32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counter32(pub u32);

/// Modular add: `(c + bytes) mod 2^32`.
pub fn counter_add(c: Counter32, bytes: u64) -> Counter32 {
    Counter32((c.0 as u64).wrapping_add(bytes) as u32)
}

/// Rate estimate in bits per second from two polled counter values.
/// Correct iff at most one wrap occurred in the interval; systematically
/// underestimates otherwise.
pub fn poll_estimate(prev: Counter32, curr: Counter32, interval_s: u64) -> f64 {
    assert!(interval_s > 0);
    let delta = curr.0.wrapping_sub(prev.0) as u64;
    (delta * 8) as f64 / interval_s as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollerConfig {
    pub poll_interval_s: u64,
    /// Spacing between successive agents within one serialized sweep.
    pub sweep_gap_ms: u64,
    /// Optional per-reply processing delay at the agent.
    pub reply_delay_ms: u64,
}

impl Default for PollerConfig {
    fn default() -> Self {
        PollerConfig {
            poll_interval_s: 300,
            sweep_gap_ms: 10,
            reply_delay_ms: 0,
        }
    }
}

/// Constant-rate traffic profile applied to every polled agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub bytes_per_sec: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollSample {
    pub agent_id: u64,
    pub at_ms: u64,
    pub estimate_bps: f64,
    pub true_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub stats: SimStats,
    pub total_messages: u64,
    pub samples: Vec<PollSample>,
    /// Request-to-reply latency per answered poll (jitter evidence).
    pub reply_latency_ms: Vec<u64>,
    pub max_abs_error_bps: f64,
}

/// True byte counter of one agent at simulated time `t_ms`.
fn counter_at(bytes_per_sec: u64, t_ms: u64) -> Counter32 {
    let total = (bytes_per_sec as u128 * t_ms as u128) / 1000;
    Counter32((total % (1u128 << 32)) as u32)
}

/// Run serialized polling sweeps over `num_agents` agents for `duration_s`
/// seconds of schedule (one sweep per interval; in-flight replies drain).
pub fn run_polling_scenario(
    num_agents: u64,
    link: LinkModel,
    cfg: PollerConfig,
    profile: TrafficProfile,
    duration_s: u64,
    seed: u64,
) -> Result<BaselineReport, BaselineError> {
    if cfg.poll_interval_s == 0 {
        return Err(BaselineError::ConfigInvalid("poll_interval_s must be > 0".into()));
    }
    if num_agents == 0 {
        return Err(BaselineError::ConfigInvalid("need at least one agent".into()));
    }
    if duration_s < cfg.poll_interval_s {
        return Err(BaselineError::ConfigInvalid(
            "duration shorter than one poll interval".into(),
        ));
    }
    link.validate().map_err(BaselineError::ConfigInvalid)?;

    let mut net = Network::new(link, seed, "baseline");
    net.add_node(MANAGER_NODE);
    for agent in 1..=num_agents {
        net.add_node(agent);
    }

    // Sweep k polls agent i at k*interval + (i-1)*sweep_gap: the sweep is
    // serialized, polls are not concurrent.
    let sweeps = duration_s / cfg.poll_interval_s;
    for k in 1..=sweeps {
        for (i, agent) in (1..=num_agents).enumerate() {
            let at = k * cfg.poll_interval_s * 1000 + i as u64 * cfg.sweep_gap_ms;
            net.schedule(at, EventKind::TimerFire { node: agent });
        }
    }

    let true_bps = profile.bytes_per_sec as f64 * 8.0;
    // The poller's tracking of agent i starts at its slot in the first
    // sweep; seed the previous counter at that offset so the first delta
    // spans exactly one interval.
    let mut prev_counter: BTreeMap<u64, Counter32> = (1..=num_agents)
        .map(|a| {
            let offset = (a - 1) * cfg.sweep_gap_ms;
            (a, counter_at(profile.bytes_per_sec, offset))
        })
        .collect();
    let mut request_sent_at: BTreeMap<u64, u64> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut reply_latency_ms = Vec::new();

    net.run_until(u64::MAX - 1, |net, event| match event.kind {
        // Manager-side sweep timer: issue the poll request.
        EventKind::TimerFire { node: agent } => {
            let now = event.at;
            request_sent_at.insert(agent, now);
            net.stats.note_kind("PollRequest");
            net.schedule_send(MANAGER_NODE, agent, vec![0x01; POLL_REQUEST_LEN], now)
                .expect("nodes registered");
        }
        EventKind::Deliver { src, dst, bytes } => {
            let now = event.at;
            if dst != MANAGER_NODE {
                // Agent answers with its current counter value.
                let counter = counter_at(profile.bytes_per_sec, now);
                let mut reply = vec![0x02; POLL_RESPONSE_LEN];
                reply[1..5].copy_from_slice(&counter.0.to_be_bytes());
                net.stats.note_kind("PollResponse");
                net.schedule_send(dst, MANAGER_NODE, reply, now + cfg.reply_delay_ms)
                    .expect("nodes registered");
            } else {
                // Manager receives a reply: estimate over one *nominal*
                // interval, regardless of how many polls were missed.
                let counter = Counter32(u32::from_be_bytes(bytes[1..5].try_into().unwrap()));
                let prev = prev_counter.insert(src, counter).unwrap_or_default();
                samples.push(PollSample {
                    agent_id: src,
                    at_ms: now,
                    estimate_bps: poll_estimate(prev, counter, cfg.poll_interval_s),
                    true_bps,
                });
                if let Some(sent_at) = request_sent_at.remove(&src) {
                    reply_latency_ms.push(now - sent_at);
                }
            }
        }
        _ => {}
    });

    let max_abs_error_bps = samples
        .iter()
        .map(|s| (s.true_bps - s.estimate_bps).abs())
        .fold(0.0, f64::max);
    let total_messages = net.stats.sends;
    Ok(BaselineReport {
        stats: net.stats.clone(),
        total_messages,
        samples,
        reply_latency_ms,
        max_abs_error_bps,
    })
}
