//! Deterministic discrete-event network: an unreliable, jittery, UDP-like
//! link between nodes, driven by a seeded PRNG.
//!
//! Determinism contract: events execute in `(at, seq_tiebreak)` order, time
//! is integer milliseconds, and each directed link draws from its own
//! ChaCha12 stream seeded as
//! `SHA-256("cnmm.link.v1" || domain || seed_le || src_le || dst_le)`.
//! Per send, the loss draw (`f64` in [0,1), skipped when `loss_prob == 0`)
//! comes first; the jitter draw (uniform integer in `[0, jitter_ms]`,
//! skipped when `jitter_ms == 0`) only happens for delivered packets.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type NodeId = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("node {0} is not part of the network")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub base_latency_ms: u64,
    /// Extra delay drawn uniformly from [0, jitter_ms].
    pub jitter_ms: u64,
    pub loss_prob: f64,
    /// When false, per-link delivery order is forced FIFO.
    pub allow_reorder: bool,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            base_latency_ms: 0,
            jitter_ms: 0,
            loss_prob: 0.0,
            allow_reorder: true,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(format!("loss_prob {} outside [0, 1]", self.loss_prob));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Deliver {
        src: NodeId,
        dst: NodeId,
        bytes: Vec<u8>,
    },
    TimerFire {
        node: NodeId,
    },
    SampleInject {
        node: NodeId,
        object_id: u32,
        value_milli: i64,
    },
    TrafficInject {
        node: NodeId,
        object_id: u32,
        sent: u64,
        received: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub at: u64,
    /// Monotonic insertion counter; total order tiebreak at equal times.
    pub seq_tiebreak: u64,
    pub kind: EventKind,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq_tiebreak).cmp(&(other.at, other.seq_tiebreak))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub sends: u64,
    pub deliveries: u64,
    pub drops: u64,
    pub bytes_sent: u64,
    pub bytes_delivered: u64,
    /// Counts per protocol message kind, recorded by the driver.
    pub kind_counts: BTreeMap<String, u64>,
}

impl SimStats {
    pub fn note_kind(&mut self, kind: &str) {
        *self.kind_counts.entry(kind.to_string()).or_insert(0) += 1;
    }

    pub fn total_messages(&self) -> u64 {
        self.sends
    }
}

#[derive(Debug)]
pub struct Network {
    link: LinkModel,
    seed: u64,
    domain: Vec<u8>,
    nodes: BTreeSet<NodeId>,
    queue: BinaryHeap<Reverse<SimEvent>>,
    next_tiebreak: u64,
    rngs: BTreeMap<(NodeId, NodeId), ChaCha12Rng>,
    last_arrival: BTreeMap<(NodeId, NodeId), u64>,
    pub stats: SimStats,
    now: u64,
}

impl Network {
    /// `domain` separates PRNG streams between otherwise identical runs
    /// (e.g. the event-driven run vs the polling baseline).
    pub fn new(link: LinkModel, seed: u64, domain: &str) -> Self {
        Network {
            link,
            seed,
            domain: domain.as_bytes().to_vec(),
            nodes: BTreeSet::new(),
            queue: BinaryHeap::new(),
            next_tiebreak: 0,
            rngs: BTreeMap::new(),
            last_arrival: BTreeMap::new(),
            stats: SimStats::default(),
            now: 0,
        }
    }

    pub fn add_node(&mut self, id: NodeId) {
        self.nodes.insert(id);
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn link(&self) -> &LinkModel {
        &self.link
    }

    /// The documented per-link substream derivation; exposed so tests can
    /// reproduce drop counts independently.
    pub fn link_rng_seed(seed: u64, domain: &[u8], src: NodeId, dst: NodeId) -> [u8; 32] {
        Sha256::new()
            .chain_update(b"cnmm.link.v1")
            .chain_update(domain)
            .chain_update(seed.to_le_bytes())
            .chain_update(src.to_le_bytes())
            .chain_update(dst.to_le_bytes())
            .finalize()
            .into()
    }

    fn link_rng(&mut self, src: NodeId, dst: NodeId) -> &mut ChaCha12Rng {
        let (seed, domain) = (self.seed, &self.domain);
        self.rngs.entry((src, dst)).or_insert_with(|| {
            ChaCha12Rng::from_seed(Self::link_rng_seed(seed, domain, src, dst))
        })
    }

    /// Queue a raw event. Events never execute before the time that
    /// scheduled them.
    pub fn schedule(&mut self, at: u64, kind: EventKind) {
        let at = at.max(self.now);
        let seq_tiebreak = self.next_tiebreak;
        self.next_tiebreak += 1;
        self.queue.push(Reverse(SimEvent {
            at,
            seq_tiebreak,
            kind,
        }));
    }

    /// Fire-and-forget send: lost with `loss_prob`, otherwise delivered
    /// after base latency plus jitter. No link-layer retransmission.
    pub fn schedule_send(
        &mut self,
        src: NodeId,
        dst: NodeId,
        bytes: Vec<u8>,
        now: u64,
    ) -> Result<(), SimError> {
        if !self.nodes.contains(&src) {
            return Err(SimError::UnknownNode(src));
        }
        if !self.nodes.contains(&dst) {
            return Err(SimError::UnknownNode(dst));
        }
        self.stats.sends += 1;
        self.stats.bytes_sent += bytes.len() as u64;

        let link = self.link;
        let rng = self.link_rng(src, dst);
        if link.loss_prob > 0.0 && rng.gen::<f64>() < link.loss_prob {
            self.stats.drops += 1;
            return Ok(());
        }
        let jitter = if link.jitter_ms > 0 {
            self.link_rng(src, dst).gen_range(0..=link.jitter_ms)
        } else {
            0
        };
        let mut at = now + link.base_latency_ms + jitter;
        if !link.allow_reorder {
            let last = self.last_arrival.entry((src, dst)).or_insert(0);
            at = at.max(*last);
            *last = at;
        }
        self.schedule(at, EventKind::Deliver { src, dst, bytes });
        Ok(())
    }

    pub fn peek_at(&self) -> Option<u64> {
        self.queue.peek().map(|Reverse(e)| e.at)
    }

    /// Pop the next event due at or before `t_end`, advancing the clock.
    pub fn pop_due(&mut self, t_end: u64) -> Option<SimEvent> {
        match self.queue.peek() {
            Some(Reverse(e)) if e.at <= t_end => {}
            _ => return None,
        }
        let Reverse(event) = self.queue.pop().expect("peeked above");
        self.now = event.at;
        if let EventKind::Deliver { bytes, .. } = &event.kind {
            self.stats.deliveries += 1;
            self.stats.bytes_delivered += bytes.len() as u64;
        }
        Some(event)
    }

    /// Execute events in `(at, seq_tiebreak)` order until `t_end`,
    /// passing each to `handler` (which may schedule more work).
    pub fn run_until<F>(&mut self, t_end: u64, mut handler: F) -> SimStats
    where
        F: FnMut(&mut Network, SimEvent),
    {
        while let Some(event) = self.pop_due(t_end) {
            handler(self, event);
        }
        self.now = self.now.max(t_end.min(u64::MAX - 1));
        self.stats.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(link: LinkModel, seed: u64) -> Network {
        let mut n = Network::new(link, seed, "test");
        n.add_node(1);
        n.add_node(2);
        n
    }

    #[test]
    fn degenerate_link_delivers_exactly_at_base_latency() {
        let mut n = net(
            LinkModel {
                base_latency_ms: 10,
                ..Default::default()
            },
            0,
        );
        n.schedule_send(1, 2, vec![0xAB], 5).unwrap();
        let ev = n.pop_due(u64::MAX).unwrap();
        assert_eq!(ev.at, 15);
        assert!(matches!(ev.kind, EventKind::Deliver { dst: 2, .. }));
    }

    #[test]
    fn full_loss_drops_everything() {
        let mut n = net(
            LinkModel {
                loss_prob: 1.0,
                ..Default::default()
            },
            0,
        );
        for _ in 0..50 {
            n.schedule_send(1, 2, vec![0], 0).unwrap();
        }
        assert_eq!(n.stats.drops, 50);
        assert_eq!(n.stats.sends, 50);
        assert!(n.pop_due(u64::MAX).is_none());
    }

    #[test]
    fn drop_count_matches_independent_prng_replay() {
        let link = LinkModel {
            loss_prob: 0.3,
            ..Default::default()
        };
        let mut n = net(link, 42);
        for _ in 0..1000 {
            n.schedule_send(1, 2, vec![0], 0).unwrap();
        }
        // Independent replay of the documented stream: jitter is 0, so the
        // link stream is exactly one loss draw per send.
        let mut rng = ChaCha12Rng::from_seed(Network::link_rng_seed(42, b"test", 1, 2));
        let expected = (0..1000).filter(|_| rng.gen::<f64>() < 0.3).count() as u64;
        assert_eq!(n.stats.drops, expected);
        assert!(expected > 200 && expected < 400, "sanity: {expected}");
    }

    #[test]
    fn conservation_sends_equal_deliveries_plus_drops() {
        let link = LinkModel {
            base_latency_ms: 3,
            jitter_ms: 9,
            loss_prob: 0.25,
            allow_reorder: true,
        };
        let mut n = net(link, 7);
        for i in 0..500u64 {
            n.schedule_send(1, 2, vec![0; 10], i).unwrap();
        }
        n.run_until(u64::MAX - 1, |_, _| {});
        assert_eq!(n.stats.sends, n.stats.deliveries + n.stats.drops);
        assert_eq!(n.stats.sends, 500);
    }

    #[test]
    fn same_seed_same_stats() {
        let link = LinkModel {
            base_latency_ms: 5,
            jitter_ms: 20,
            loss_prob: 0.1,
            allow_reorder: true,
        };
        let run = || {
            let mut n = net(link, 99);
            for i in 0..200u64 {
                n.schedule_send(1, 2, vec![0; 4], i * 3).unwrap();
            }
            n.run_until(u64::MAX - 1, |_, _| {})
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn equal_timestamps_execute_in_insertion_order() {
        let mut n = net(LinkModel::default(), 0);
        n.schedule(10, EventKind::TimerFire { node: 1 });
        n.schedule(10, EventKind::TimerFire { node: 2 });
        let first = n.pop_due(u64::MAX).unwrap();
        let second = n.pop_due(u64::MAX).unwrap();
        assert_eq!(first.kind, EventKind::TimerFire { node: 1 });
        assert_eq!(second.kind, EventKind::TimerFire { node: 2 });
    }

    #[test]
    fn empty_queue_returns_immediately() {
        let mut n = net(LinkModel::default(), 0);
        let stats = n.run_until(1000, |_, _| {});
        assert_eq!(stats, SimStats::default());
    }

    #[test]
    fn unknown_node_rejected() {
        let mut n = net(LinkModel::default(), 0);
        assert_eq!(
            n.schedule_send(1, 9, vec![], 0),
            Err(SimError::UnknownNode(9))
        );
    }

    #[test]
    fn no_reorder_forces_fifo() {
        let link = LinkModel {
            base_latency_ms: 1,
            jitter_ms: 50,
            loss_prob: 0.0,
            allow_reorder: false,
        };
        let mut n = net(link, 3);
        for i in 0..100u64 {
            n.schedule_send(1, 2, i.to_be_bytes().to_vec(), i).unwrap();
        }
        let mut seen = Vec::new();
        n.run_until(u64::MAX - 1, |_, ev| {
            if let EventKind::Deliver { bytes, .. } = ev.kind {
                seen.push(u64::from_be_bytes(bytes.try_into().unwrap()));
            }
        });
        let mut sorted = seen.clone();
        sorted.sort_unstable();
        assert_eq!(seen, sorted);
    }

    #[test]
    fn zero_loss_zero_jitter_preserves_send_order() {
        let mut n = net(
            LinkModel {
                base_latency_ms: 10,
                ..Default::default()
            },
            0,
        );
        for i in 0..20u64 {
            n.schedule_send(1, 2, vec![i as u8], i).unwrap();
        }
        let mut seen = Vec::new();
        n.run_until(u64::MAX - 1, |_, ev| {
            if let EventKind::Deliver { bytes, .. } = ev.kind {
                seen.push(bytes[0]);
            }
        });
        assert_eq!(seen, (0..20).map(|i| i as u8).collect::<Vec<_>>());
    }
}
