//! Agent/manager conversation invariants, driven directly on the state
//! machines (no simulated link; lossless, zero-latency exchange).

use cnmm_core::agent::{AgentConfig, AgentState, MetricSpec};
use cnmm_core::manager::{ManagerPoolConfig, ManagerPoolState};
use cnmm_core::secure_channel::ChannelKeys;
use cnmm_core::wire::{Message, MessageKind};

fn new_agent(agent_id: u64) -> AgentState {
    let mut config = AgentConfig::new(agent_id, ChannelKeys::derive(0, agent_id));
    config.update_interval_s = 60;
    AgentState::new(
        config,
        vec![MetricSpec::new(1, "headroom", 65_000, 40_000)],
    )
}

fn new_pool() -> ManagerPoolState {
    ManagerPoolState::new(ManagerPoolConfig {
        update_interval_expectation_s: 60,
        ..Default::default()
    })
}

/// Lossless exchange: push agent messages through the pool and replies back.
fn exchange(
    agent: &mut AgentState,
    pool: &mut ManagerPoolState,
    outbound: Vec<Message>,
    now: u64,
) -> Vec<(Message, Vec<Message>)> {
    let mut log = Vec::new();
    for msg in outbound {
        let replies = pool.handle_message(msg.clone(), now);
        for reply in &replies {
            let follow_ups = agent.handle_message(reply, now).unwrap();
            assert!(
                follow_ups.is_empty(),
                "acks must not trigger further traffic"
            );
        }
        log.push((msg, replies));
    }
    log
}

#[test]
fn registration_handshake() {
    let mut agent = new_agent(1);
    let mut pool = new_pool();
    let adv = agent.tick(0).unwrap();
    assert_eq!(adv.len(), 1);
    let log = exchange(&mut agent, &mut pool, adv, 0);
    assert_eq!(log[0].1[0].header.kind, MessageKind::Registration);
    assert!(agent.registered);
    assert!(pool.is_registered(1));
}

#[test]
fn every_agent_message_gets_exactly_one_matching_reply() {
    let mut agent = new_agent(1);
    let mut pool = new_pool();
    let mut now = 0u64;
    let mut pairs: Vec<(u32, MessageKind, usize)> = Vec::new();

    let adv = agent.tick(now).unwrap();
    for (msg, replies) in exchange(&mut agent, &mut pool, adv, now) {
        pairs.push((msg.header.sequence, msg.header.kind, replies.len()));
        for r in replies {
            assert_eq!(r.header.sequence, msg.header.sequence);
        }
    }

    // A mixed life: timer updates, level crossings, traps, recovery.
    let samples = [
        (80_000, false),
        (60_000, false), // minimum crossing: update
        (30_000, true),  // threshold crossing: trap
        (80_000, false), // re-arm
        (55_000, false), // minimum crossing again
    ];
    for (value, _is_trap) in samples {
        now += 10_000;
        let out = agent.observe_sample(1, value, now).unwrap();
        for (msg, replies) in exchange(&mut agent, &mut pool, out, now) {
            pairs.push((msg.header.sequence, msg.header.kind, replies.len()));
            for r in &replies {
                assert_eq!(r.header.sequence, msg.header.sequence);
            }
        }
        let ticked = agent.tick(now).unwrap();
        for (msg, replies) in exchange(&mut agent, &mut pool, ticked, now) {
            pairs.push((msg.header.sequence, msg.header.kind, replies.len()));
        }
    }
    for _ in 0..5 {
        now += 60_000;
        let out = agent.tick(now).unwrap();
        for (msg, replies) in exchange(&mut agent, &mut pool, out, now) {
            pairs.push((msg.header.sequence, msg.header.kind, replies.len()));
        }
    }

    assert!(pairs.len() > 8);
    // Universal acknowledgement: exactly one reply each, and sequences are
    // strictly increasing across everything the agent emitted.
    for (seq, kind, reply_count) in &pairs {
        assert_eq!(*reply_count, 1, "seq {seq} kind {kind:?}");
    }
    for w in pairs.windows(2) {
        assert!(w[1].0 > w[0].0);
    }
    // Lossless run: every trap was answered, nothing pending or abandoned.
    assert_eq!(agent.pending_trap_count(), 0);
    assert!(agent.events.is_empty());
}

#[test]
fn interval_deltas_conserve_recorded_traffic() {
    let mut agent = new_agent(1);
    let mut pool = new_pool();
    let adv = agent.tick(0).unwrap();
    exchange(&mut agent, &mut pool, adv, 0);

    let mut injected_sent = 0u64;
    let mut injected_received = 0u64;
    let mut emitted_sent = 0u64;
    let mut emitted_received = 0u64;
    let mut now = 0u64;
    for step in 1..200u64 {
        now += 7_000;
        let (s, r) = (step * 13 % 97, step * 7 % 89);
        agent.record_traffic(1, s, r).unwrap();
        injected_sent += s;
        injected_received += r;
        let out = agent.tick(now).unwrap();
        for (msg, _) in exchange(&mut agent, &mut pool, out, now) {
            for rec in &msg.records {
                emitted_sent += rec.interval_packets_sent;
                emitted_received += rec.interval_packets_received;
            }
        }
    }
    let (residual_sent, residual_received) = agent.undrained_tallies();
    assert_eq!(emitted_sent + residual_sent, injected_sent);
    assert_eq!(emitted_received + residual_received, injected_received);
}

#[test]
fn replaying_captured_messages_changes_no_state() {
    let mut agent = new_agent(1);
    let mut pool = new_pool();
    let adv = agent.tick(0).unwrap();
    let mut captured = adv.clone();
    exchange(&mut agent, &mut pool, adv, 0);
    let out = agent.tick(60_000).unwrap();
    captured.extend(out.clone());
    exchange(&mut agent, &mut pool, out, 60_000);

    let status_before = format!("{:?}", pool.query_agent_status(1).unwrap());
    let drops_before = pool.drop_stats.duplicate_sequence;
    for msg in captured {
        let replies = pool.handle_message(msg, 70_000);
        assert!(replies.is_empty());
    }
    assert_eq!(format!("{:?}", pool.query_agent_status(1).unwrap()), status_before);
    assert!(pool.drop_stats.duplicate_sequence > drops_before);
}

#[test]
fn trap_is_acked_and_cleared_at_zero_loss() {
    let mut agent = new_agent(1);
    let mut pool = new_pool();
    let adv = agent.tick(0).unwrap();
    exchange(&mut agent, &mut pool, adv, 0);
    let traps = agent.observe_sample(1, 10_000, 1_000).unwrap();
    assert_eq!(traps[0].header.kind, MessageKind::Trap);
    assert_eq!(agent.pending_trap_count(), 1);
    exchange(&mut agent, &mut pool, traps, 1_000);
    assert_eq!(agent.pending_trap_count(), 0);
    // The trap surfaced on the console.
    assert_eq!(pool.alerts.len(), 1);
}
