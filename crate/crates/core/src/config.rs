//! Run configuration, loadable from TOML. Every section and field is optional
//! and falls back to its default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::cluster::{ClusterParams, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::pattern::Thresholds;
use crate::pipeline::{ModelSpec, RunMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Input seed of the calibration pass; kept apart from the evaluation input.
    pub input_seed: u64,
    pub resolution: usize,
    pub embedder: String,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { input_seed: 1_000_003, resolution: DEFAULT_RESOLUTION, embedder: "flatten-l2".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSpec,
    pub thresholds: Thresholds,
    pub cluster: ClusterParams,
    pub calibration: CalibrationConfig,
    pub bench: BenchConfig,
    pub mode: RunMode,
    /// Worker threads; `None` lets the thread pool decide.
    pub threads: Option<usize>,
    pub out: PathBuf,
    /// Write one PGM image per head mask next to the trace.
    pub dump_masks: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            thresholds: Thresholds::default(),
            cluster: ClusterParams::default(),
            calibration: CalibrationConfig::default(),
            bench: BenchConfig::default(),
            mode: RunMode::Sparse,
            threads: None,
            out: PathBuf::from("out"),
            dump_masks: false,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.thresholds.validate()?;
        self.cluster.validate()?;
        self.bench.validate()?;
        if self.calibration.resolution == 0 {
            return Err(Error::Config("calibration.resolution must be positive".into()));
        }
        if self.calibration.resolution > self.model.n_tokens {
            return Err(Error::Config(format!(
                "calibration.resolution {} exceeds model.n_tokens {}",
                self.calibration.resolution, self.model.n_tokens
            )));
        }
        crate::cluster::embedder_by_id(&self.calibration.embedder)?;
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}
