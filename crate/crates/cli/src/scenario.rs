//! Scenario file schema (JSON) and validation.

use cnmm_core::secure_channel::{Cipher, Compression};
use cnmm_core::simnet::LinkModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: u64,
    pub agents: AgentsConfig,
    #[serde(default)]
    pub link: LinkModel,
    #[serde(default)]
    pub cnmm: CnmmConfig,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub agent_failures: Vec<AgentFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentsConfig {
    /// Agents are simulator nodes 1..=count; node 0 is the manager pool.
    pub count: u64,
    /// Metric set shared by every agent.
    pub metrics: Vec<MetricSpecConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpecConfig {
    pub object_id: u32,
    pub name: String,
    pub minimum_level: i64,
    pub threshold_level: i64,
    /// Defaults to 5% of (minimum - threshold).
    #[serde(default)]
    pub hysteresis: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnmmConfig {
    pub update_interval_s: u64,
    pub trap_retry_limit: u32,
    pub trap_retry_backoff_s: u64,
    pub num_virtual_managers: usize,
    pub get_timeout_s: u64,
    pub deadline_slack: f64,
    /// Manager-side expectation; defaults to `update_interval_s`.
    pub update_interval_expectation_s: Option<u64>,
    pub max_fragment: usize,
    pub compression: Compression,
    pub cipher: Cipher,
}

impl Default for CnmmConfig {
    fn default() -> Self {
        CnmmConfig {
            update_interval_s: 300,
            trap_retry_limit: 5,
            trap_retry_backoff_s: 2,
            num_virtual_managers: 4,
            get_timeout_s: 5,
            deadline_slack: 1.5,
            update_interval_expectation_s: None,
            max_fragment: 1400,
            compression: Compression::Deflate,
            cipher: Cipher::ChaCha20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub poll_interval_s: u64,
    pub sweep_gap_ms: u64,
    pub reply_delay_ms: u64,
    /// Constant per-agent traffic rate driving the 32-bit byte counters.
    pub bytes_per_sec: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            poll_interval_s: 300,
            sweep_gap_ms: 10,
            reply_delay_ms: 0,
            bytes_per_sec: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub at_ms: u64,
    pub agent_id: u64,
    pub object_id: u32,
    #[serde(flatten)]
    pub kind: InjectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InjectionKind {
    Sample { value_milli: i64 },
    Traffic { sent: u64, received: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFailure {
    pub agent_id: u64,
    pub fail_at_ms: u64,
    #[serde(default)]
    pub recover_at_ms: Option<u64>,
}

impl Scenario {
    /// Structural validation beyond what the JSON schema enforces.
    /// Returns every problem found, each anchored to its field path.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let duration_ms = self.duration_s.saturating_mul(1000);

        if self.duration_s == 0 {
            errors.push("duration_s: must be positive".into());
        }
        if self.agents.count == 0 {
            errors.push("agents.count: need at least one agent".into());
        }
        if self.agents.metrics.is_empty() {
            errors.push("agents.metrics: need at least one metric".into());
        }
        let mut seen_ids = std::collections::BTreeSet::new();
        for (i, m) in self.agents.metrics.iter().enumerate() {
            if m.minimum_level <= m.threshold_level {
                errors.push(format!(
                    "agents.metrics[{i}]: minimum_level must sit above threshold_level"
                ));
            }
            if m.hysteresis.is_some_and(|h| h < 0) {
                errors.push(format!("agents.metrics[{i}]: hysteresis must be >= 0"));
            }
            if !seen_ids.insert(m.object_id) {
                errors.push(format!("agents.metrics[{i}]: duplicate object_id {}", m.object_id));
            }
        }
        if let Err(e) = self.link.validate() {
            errors.push(format!("link: {e}"));
        }
        if self.cnmm.update_interval_s == 0 {
            errors.push("cnmm.update_interval_s: must be positive".into());
        }
        if self.cnmm.trap_retry_limit == 0 {
            errors.push("cnmm.trap_retry_limit: must be >= 1".into());
        }
        if self.cnmm.num_virtual_managers == 0 {
            errors.push("cnmm.num_virtual_managers: must be >= 1".into());
        }
        if self.cnmm.max_fragment < 64 {
            errors.push("cnmm.max_fragment: must be >= 64".into());
        }
        if let Some(b) = &self.baseline {
            if b.poll_interval_s == 0 {
                errors.push("baseline.poll_interval_s: must be positive".into());
            } else if self.duration_s < b.poll_interval_s {
                errors.push("baseline.poll_interval_s: duration shorter than one poll".into());
            }
        }
        for (i, inj) in self.injections.iter().enumerate() {
            if inj.agent_id == 0 || inj.agent_id > self.agents.count {
                errors.push(format!("injections[{i}]: agent_id {} out of range", inj.agent_id));
            }
            if !seen_ids.contains(&inj.object_id) {
                errors.push(format!(
                    "injections[{i}]: object_id {} not declared in agents.metrics",
                    inj.object_id
                ));
            }
            if inj.at_ms > duration_ms {
                errors.push(format!("injections[{i}]: at_ms {} past duration", inj.at_ms));
            }
        }
        for (i, f) in self.agent_failures.iter().enumerate() {
            if f.agent_id == 0 || f.agent_id > self.agents.count {
                errors.push(format!("agent_failures[{i}]: agent_id {} out of range", f.agent_id));
            }
            if f.fail_at_ms > duration_ms {
                errors.push(format!("agent_failures[{i}]: fail_at_ms past duration"));
            }
            if let Some(r) = f.recover_at_ms {
                if r <= f.fail_at_ms {
                    errors.push(format!("agent_failures[{i}]: recover_at_ms before failure"));
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn update_interval_expectation_s(&self) -> u64 {
        self.cnmm
            .update_interval_expectation_s
            .unwrap_or(self.cnmm.update_interval_s)
    }
}
