use crate::attention::{AttentionInput, BlockGeometry, BlockMask};
use crate::error::Result;
use crate::pattern::{sanitize_mask, select_cumulative};
use crate::tensor::{dot, Real};

/// Intermediate quantities of a vertical-slash search, exposed for inspection.
#[derive(Debug, Clone)]
pub struct VerticalSlashSearch {
    /// Normalized attention mass per key block.
    pub vertical_scores: Vec<f64>,
    /// Normalized attention mass per diagonal-offset bin; bin `b` holds token
    /// pairs with `b·bs ≤ r − c < (b+1)·bs`.
    pub slash_scores: Vec<f64>,
    pub verticals: Vec<usize>,
    pub slashes: Vec<usize>,
    pub mask: BlockMask,
}

pub fn search_vertical_slash<T: Real>(
    input: &AttentionInput<T>,
    gamma: f64,
    block_size: usize,
) -> Result<BlockMask> {
    Ok(search_vertical_slash_detailed(input, gamma, block_size)?.mask)
}

/// Attends the last query block to all visible keys, sums the probabilities
/// along key-block columns (verticals) and along diagonal offsets (slashes),
/// and keeps the smallest set of each that covers `gamma` of the mass.
///
/// A slash bin spans `block_size` token diagonals, which can touch two block
/// diagonals, so bin `b` marks block offsets `b` and `b + 1`.
pub fn search_vertical_slash_detailed<T: Real>(
    input: &AttentionInput<T>,
    gamma: f64,
    block_size: usize,
) -> Result<VerticalSlashSearch> {
    let geometry = BlockGeometry::new(input.len(), block_size)?;
    let n = geometry.n_blocks();
    let scale = input.scale();
    let mut vertical = vec![0.0f64; n];
    let mut slash = vec![0.0f64; n];
    let mut scores = Vec::with_capacity(input.len());

    for r in geometry.range(n - 1) {
        let q = input.q().row(r);
        scores.clear();
        scores.extend((0..input.key_limit(r)).map(|c| (dot(q, input.k().row(c)) * scale).widen()));
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = scores.iter().map(|&s| (s - max).exp()).sum();
        for (c, &s) in scores.iter().enumerate() {
            let p = (s - max).exp() / norm;
            vertical[geometry.block_of(c)] += p;
            if c <= r {
                slash[(r - c) / block_size] += p;
            }
        }
    }

    let normalize = |v: &mut Vec<f64>| {
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            v.iter_mut().for_each(|x| *x /= total);
        }
    };
    normalize(&mut vertical);
    normalize(&mut slash);

    let verticals = select_cumulative(&vertical, gamma)?;
    let slashes = select_cumulative(&slash, gamma)?;

    let mut mask = BlockMask::empty(geometry);
    for &j in &verticals {
        for i in j..n {
            mask.set(i, j, true);
        }
    }
    for &b in &slashes {
        for offset in [b, b + 1] {
            for i in offset..n {
                mask.set(i, i - offset, true);
            }
        }
    }
    let mask = sanitize_mask(&mask);
    Ok(VerticalSlashSearch { vertical_scores: vertical, slash_scores: slash, verticals, slashes, mask })
}
