use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gating and selection thresholds.
///
/// `delta` may be set to 1.01 to disable highly-sparse exclusion entirely,
/// since no distance exceeds 1. `tau = 0` disables sharing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Cumulative attention mass a selected block set must cover.
    pub gamma: f64,
    /// Similarity gate on JS distance to the cluster's representative.
    pub tau: f64,
    /// Sparsity gate on JS distance to uniform.
    pub delta: f64,
}

impl Thresholds {
    pub const DELTA_DISABLED: f64 = 1.01;

    pub fn new(gamma: f64, tau: f64, delta: f64) -> Result<Self> {
        let t = Self { gamma, tau, delta };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must be in [0, 1], got {}", self.tau)));
        }
        if !(0.0..=Self::DELTA_DISABLED).contains(&self.delta) {
            return Err(Error::Config(format!(
                "delta must be in [0, 1.01] (1.01 disables sparse-head exclusion), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { gamma: 0.9, tau: 0.2, delta: 0.3 }
    }
}
