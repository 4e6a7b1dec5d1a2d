//! Block-sparse prefill attention with pattern sharing across heads.
//!
//! Heads are grouped offline into clusters by the similarity of their
//! attention maps. During prefill the first fully computed head of each
//! cluster leaves a pivotal pattern that later heads of the same cluster may
//! reuse, gated by Jensen–Shannon distances; other heads fall back to a
//! vertical-slash pattern search.

pub mod attention;
pub mod bench;
pub mod cluster;
pub mod config;
mod error;
pub mod pattern;
pub mod pgm;
pub mod pipeline;
mod tensor;

pub use attention::{AttentionInput, BlockGeometry, BlockMask, BlockScoreMap, DEFAULT_BLOCK_SIZE};
pub use cluster::{ClusterId, ClusterParams, HeadDict};
pub use config::Config;
pub use error::{Error, Result};
pub use pattern::{PatternDecision, PatternKind, ProbVector, Thresholds};
pub use pipeline::{ModelSpec, RunMode, RunTrace, SynthModel};
pub use tensor::{Matrix, Real};
