//! Sparse-pattern construction, gating and sharing.
//!
//! A head either reuses the pivotal pattern of its cluster (built from the
//! first fully computed head of that cluster in the current pass) or falls
//! back to a vertical-slash search on its own queries and keys. The choice is
//! gated by two Jensen–Shannon distances on the last query block's key-block
//! distribution: distance from uniform (sparsity) and distance from the
//! cluster's stored representative (similarity).

mod gate;
mod js;
mod pivotal;
mod pooling;
mod prob;
mod sanitize;
mod select;
mod thresholds;
mod vertical_slash;

pub use gate::{
    determine_sparse_pattern, estimate_last_block_distribution, FallbackReason, PatternDecision,
    PatternKind,
};
pub use js::js_distance;
pub use pivotal::{
    block_probabilities, construct_pivotal_pattern, mask_from_block_probs, select_blocks, pivotal_from_stats, share_pivotal_pattern,
    PivotalEntry, PivotalPatternDict, SharedPattern,
};
pub use pooling::{pooling_estimate_diagnostic, PoolingDiagnostic};
pub use prob::{ProbVector, NORMALIZATION_TOL};
pub use sanitize::sanitize_mask;
pub use select::{argsort_descending, select_cumulative};
pub use thresholds::Thresholds;
pub use vertical_slash::{search_vertical_slash, search_vertical_slash_detailed, VerticalSlashSearch};
