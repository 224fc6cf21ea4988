//! Shared fixtures for the protocol benchmarks.

use cnmm_cli::scenario::{AgentsConfig, CnmmConfig, MetricSpecConfig, Scenario};
use cnmm_core::simnet::LinkModel;
use cnmm_core::wire::{Message, MessageHeader, MessageKind, MetricRecord};

/// A representative full update: one message, `records` metric records.
pub fn update_message(records: usize) -> Message {
    let records = (0..records as u32)
        .map(|i| MetricRecord {
            object_id: i + 1,
            value_milli: 42_000 - i as i64,
            interval_packets_sent: 1_000 + i as u64,
            interval_packets_received: 900 + i as u64,
        })
        .collect();
    Message::new(
        MessageHeader {
            kind: MessageKind::RegularUpdate,
            flags: 0,
            agent_id: 7,
            sequence: 123,
            timestamp_ms: 300_000,
        },
        records,
    )
}

/// A quiet hour for `agents` nodes at a 300 s update interval, loss 0.
pub fn steady_scenario(agents: u64) -> Scenario {
    Scenario {
        seed: 1,
        duration_s: 3600,
        agents: AgentsConfig {
            count: agents,
            metrics: vec![MetricSpecConfig {
                object_id: 1,
                name: "headroom".into(),
                minimum_level: 65_000,
                threshold_level: 40_000,
                hysteresis: None,
            }],
        },
        link: LinkModel::default(),
        cnmm: CnmmConfig::default(),
        baseline: None,
        injections: vec![],
        agent_failures: vec![],
    }
}
