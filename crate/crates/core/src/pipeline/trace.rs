use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{PatternDecision, PatternKind, Thresholds};
use crate::pipeline::{ModelSpec, RunMode};

pub const TRACE_VERSION: u32 = 1;

/// The pattern a head actually ran with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadPattern {
    /// Full causal attention: a cluster seed, or every head in dense mode.
    Dense,
    Shared,
    VerticalSlash,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadTimings {
    pub estimate_ms: f64,
    pub pattern_ms: f64,
    pub kernel_ms: f64,
    pub dense_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadResult {
    pub layer: usize,
    pub head: usize,
    pub cluster: u32,
    pub noise: bool,
    pub pattern: HeadPattern,
    /// Gate outcome; absent in dense mode.
    pub decision: Option<PatternDecision>,
    pub dense_seed: bool,
    pub computed_blocks: usize,
    pub total_blocks: usize,
    pub density: f64,
    /// Whether this head (re)built its cluster's pivotal entry.
    pub updated_pivot: bool,
    pub rel_error_vs_dense: Option<f64>,
    pub timings: HeadTimings,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCounts {
    pub dense: usize,
    pub shared: usize,
    pub vertical_slash: usize,
}

impl PatternCounts {
    pub fn total(&self) -> usize {
        self.dense + self.shared + self.vertical_slash
    }

    pub fn tally<'a>(heads: impl IntoIterator<Item = &'a HeadResult>) -> Self {
        let mut c = Self::default();
        for h in heads {
            match h.pattern {
                HeadPattern::Dense => c.dense += 1,
                HeadPattern::Shared => c.shared += 1,
                HeadPattern::VerticalSlash => c.vertical_slash += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub total_density: f64,
    pub computed_blocks: usize,
    pub total_blocks: usize,
    pub counts: PatternCounts,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub thresholds: Thresholds,
    pub mode: RunMode,
    pub precision: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub version: u32,
    pub config: RunConfig,
    pub heads: Vec<HeadResult>,
    pub aggregate: RunAggregate,
}

impl RunTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let trace: RunTrace = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("trace: {e}")))?;
        if trace.version != TRACE_VERSION {
            return Err(Error::Version { found: trace.version, expected: TRACE_VERSION });
        }
        Ok(trace)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Copy with all wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut t = self.clone();
        t.aggregate.wall_clock_ms = 0.0;
        for h in &mut t.heads {
            h.timings = HeadTimings::default();
        }
        t
    }

    pub fn check_invariants(&self) -> Result<()> {
        let model = &self.config.model;
        let expected = model.num_layers * model.num_heads;
        if self.heads.len() != expected || self.aggregate.counts.total() != expected {
            return Err(Error::Invariant(format!(
                "{} head results / {} counted for {expected} heads",
                self.heads.len(),
                self.aggregate.counts.total()
            )));
        }
        for h in &self.heads {
            if !(h.density > 0.0 && h.density <= 1.0) {
                return Err(Error::Invariant(format!(
                    "head ({}, {}) density {} outside (0, 1]",
                    h.layer, h.head, h.density
                )));
            }
            if h.dense_seed && h.density != 1.0 {
                return Err(Error::Invariant(format!(
                    "dense-seed head ({}, {}) ran at density {}",
                    h.layer, h.head, h.density
                )));
            }
            let shared = h.pattern == HeadPattern::Shared
                || h.decision.is_some_and(|d| d.kind == PatternKind::SharedPivot);
            if h.noise && shared {
                return Err(Error::Invariant(format!("noise head ({}, {}) shared a pattern", h.layer, h.head)));
            }
        }
        Ok(())
    }
}
