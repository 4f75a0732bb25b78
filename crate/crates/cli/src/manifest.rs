//! Run manifests: per-stage counts, provider call statistics, and a
//! diagnostics summary, written next to the run's outputs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use nuggetbank_core::error::Result;
use nuggetbank_core::formats::write_atomic;
use nuggetbank_core::providers::StatsSnapshot;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub documents_processed: usize,
    pub candidates: usize,
    pub edges: usize,
    pub clusters: usize,
    pub refined: usize,
    pub selected: usize,
}

impl StageCounts {
    pub fn add(&mut self, other: &StageCounts) {
        self.documents_processed += other.documents_processed;
        self.candidates += other.candidates;
        self.edges += other.edges;
        self.clusters += other.clusters;
        self.refined += other.refined;
        self.selected += other.selected;
    }

    /// Counts must shrink monotonically along the refinement funnel.
    pub fn audit(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.refined > self.candidates {
            violations.push(format!(
                "refined {} exceeds candidates {}",
                self.refined, self.candidates
            ));
        }
        if self.clusters > self.candidates {
            violations.push(format!(
                "clusters {} exceed candidates {}",
                self.clusters, self.candidates
            ));
        }
        violations
    }

    pub fn audit_topic(&self, cap: usize) -> Vec<String> {
        let mut violations = self.audit();
        if self.selected > self.refined.min(cap) {
            violations.push(format!(
                "selected {} exceeds min(cap {cap}, refined {})",
                self.selected, self.refined
            ));
        }
        violations
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub config_fingerprint: String,
    pub totals: StageCounts,
    pub per_topic: BTreeMap<String, StageCounts>,
    pub provider_stats: BTreeMap<String, StatsSnapshot>,
    pub diagnostics_summary: BTreeMap<String, usize>,
    pub topics_failed: Vec<String>,
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config_fingerprint: &str) -> Self {
        RunManifest {
            started_unix_ms: now_unix_ms(),
            config_fingerprint: config_fingerprint.to_string(),
            ..RunManifest::default()
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = now_unix_ms();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn total_network_calls(&self) -> u64 {
        self.provider_stats.values().map(|s| s.network_calls).sum()
    }

    pub fn total_provider_failures(&self) -> u64 {
        self.provider_stats.values().map(|s| s.failures).sum()
    }
}
