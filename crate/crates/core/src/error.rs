use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A query row block has no computed key block, so its softmax would be empty.
    #[error("degenerate mask: query block {row_block} has no computed key blocks")]
    DegenerateMask { row_block: usize },

    #[error("score vector has zero total mass")]
    EmptyDistribution,

    #[error("head (layer {layer}, head {head}) is not in the head dictionary")]
    UnknownHead { layer: usize, head: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
