//! Dense reference attention, the masked-softmax oracle, and the tiled
//! block-sparse kernel.

mod dense;
mod input;
mod kernel;
mod mask;
mod scores;

pub use dense::{dense_attention, masked_dense_attention, MaskPenalty};
pub use input::AttentionInput;
pub use kernel::{sparse_attention, SparseAttentionOutput};
pub use mask::{BlockGeometry, BlockMask};
pub use scores::{block_mean_scores, BlockScoreMap};

/// Default tile edge in tokens.
pub const DEFAULT_BLOCK_SIZE: usize = 64;
