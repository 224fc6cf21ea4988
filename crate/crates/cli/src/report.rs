//! Run report schema (JSON) and the human-readable comparison view.

use cnmm_core::agent::AgentErrorStats;
use cnmm_core::baseline::PollSample;
use cnmm_core::manager::{AlertReason, ConsoleAlert, PoolDropStats};
use cnmm_core::simnet::SimStats;
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub duration_s: u64,
    /// The scenario that produced this report, after any seed override.
    pub scenario: Scenario,
    pub cnmm: CnmmSummary,
    pub baseline: Option<BaselineSummary>,
    /// `cnmm.total_messages / baseline.total_messages`; absent without a
    /// baseline section in the scenario.
    pub reduction_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnmmSummary {
    pub stats: SimStats,
    pub total_messages: u64,
    pub alerts: Vec<ConsoleAlert>,
    pub traps_acked: u64,
    pub traps_abandoned: u64,
    pub traps_pending_at_end: u64,
    pub trap_ack_latency_ms: Option<LatencySummary>,
    pub vm_processed: Vec<u64>,
    pub manager_drop_stats: PoolDropStats,
    pub agent_error_stats: AgentErrorStats,
    /// Datagrams that failed envelope parsing or MAC verification.
    pub channel_errors: u64,
    /// Injections that arrived before the target agent registered.
    pub skipped_injections: u64,
    /// Datagrams delivered to a node while it was failed.
    pub dropped_at_failed_node: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
}

impl LatencySummary {
    /// Nearest-rank percentiles. `None` on an empty sample set.
    pub fn from_samples(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let rank = |p: f64| {
            let idx = (p * sorted.len() as f64).ceil() as usize;
            sorted[idx.clamp(1, sorted.len()) - 1]
        };
        Some(LatencySummary {
            p50: rank(0.50),
            p90: rank(0.90),
            p99: rank(0.99),
            max: *sorted.last().expect("nonempty"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub stats: SimStats,
    pub total_messages: u64,
    pub samples: Vec<PollSample>,
    pub max_abs_error_bps: f64,
    pub reply_latency_ms: Option<LatencySummary>,
}

/// One-screen comparison of the two runs in a report.
pub fn render_summary(report: &RunReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let c = &report.cnmm;
    writeln!(out, "run: seed={} duration={}s agents={}", report.seed, report.duration_s, report.scenario.agents.count).unwrap();
    writeln!(out, "event-driven protocol:").unwrap();
    writeln!(
        out,
        "  messages={} (delivered={} dropped={})",
        c.total_messages, c.stats.deliveries, c.stats.drops
    )
    .unwrap();
    for (kind, count) in &c.stats.kind_counts {
        writeln!(out, "    {kind}: {count}").unwrap();
    }
    writeln!(
        out,
        "  traps: acked={} abandoned={} pending={}",
        c.traps_acked, c.traps_abandoned, c.traps_pending_at_end
    )
    .unwrap();
    if let Some(lat) = &c.trap_ack_latency_ms {
        writeln!(
            out,
            "  trap ack latency ms: p50={} p90={} p99={} max={}",
            lat.p50, lat.p90, lat.p99, lat.max
        )
        .unwrap();
    }
    let unresponsive = c
        .alerts
        .iter()
        .filter(|a| a.reason == AlertReason::AgentUnresponsive)
        .count();
    let trap_alerts = c.alerts.len() - unresponsive;
    writeln!(
        out,
        "  console alerts: {} trap, {} unresponsive",
        trap_alerts, unresponsive
    )
    .unwrap();
    match &report.baseline {
        None => writeln!(out, "polling baseline: not run").unwrap(),
        Some(b) => {
            writeln!(out, "polling baseline:").unwrap();
            writeln!(
                out,
                "  messages={} (delivered={} dropped={})",
                b.total_messages, b.stats.deliveries, b.stats.drops
            )
            .unwrap();
            writeln!(out, "  samples={} max-abs-rate-error={:.2} bps", b.samples.len(), b.max_abs_error_bps).unwrap();
        }
    }
    if let Some(ratio) = report.reduction_ratio {
        writeln!(out, "message ratio (event-driven / polling): {ratio:.3}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_nearest_rank() {
        let samples: Vec<u64> = (1..=100).collect();
        let lat = LatencySummary::from_samples(&samples).unwrap();
        assert_eq!(lat.p50, 50);
        assert_eq!(lat.p90, 90);
        assert_eq!(lat.p99, 99);
        assert_eq!(lat.max, 100);
    }

    #[test]
    fn percentiles_single_sample() {
        let lat = LatencySummary::from_samples(&[7]).unwrap();
        assert_eq!(
            (lat.p50, lat.p90, lat.p99, lat.max),
            (7, 7, 7, 7)
        );
    }

    #[test]
    fn percentiles_empty() {
        assert!(LatencySummary::from_samples(&[]).is_none());
    }
}
