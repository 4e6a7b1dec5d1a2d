use crate::attention::{AttentionInput, BlockGeometry};
use crate::error::Result;
use crate::tensor::Real;

/// Grid of block-averaged scaled QK values. Skipped blocks hold [`BlockScoreMap::NEG_INF`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScoreMap {
    geometry: BlockGeometry,
    causal: bool,
    grid: Vec<f64>,
}

impl BlockScoreMap {
    /// Sentinel for blocks that were not computed; never produced by a computed mean.
    pub const NEG_INF: f64 = f64::NEG_INFINITY;

    pub fn new_skipped(geometry: BlockGeometry, causal: bool) -> Self {
        let n = geometry.n_blocks();
        Self { geometry, causal, grid: vec![Self::NEG_INF; n * n] }
    }

    pub(crate) fn from_grid(geometry: BlockGeometry, causal: bool, grid: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), geometry.n_blocks().pow(2));
        Self { geometry, causal, grid }
    }

    #[inline]
    pub fn geometry(&self) -> BlockGeometry {
        self.geometry
    }

    #[inline]
    pub fn causal(&self) -> bool {
        self.causal
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.geometry.n_blocks()
    }

    /// Raw cell value, possibly the sentinel.
    #[inline]
    pub fn raw(&self, i: usize, j: usize) -> f64 {
        self.grid[i * self.n_blocks() + j]
    }

    /// `None` for skipped blocks.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.raw(i, j);
        (v != Self::NEG_INF).then_some(v)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n_blocks();
        self.grid[i * n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_blocks();
        &self.grid[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn is_reachable(&self, i: usize, j: usize) -> bool {
        !self.causal || j <= i
    }

    /// True when every reachable block holds a computed mean.
    pub fn is_fully_computed(&self) -> bool {
        let n = self.n_blocks();
        (0..n).all(|i| (0..n).filter(|&j| self.is_reachable(i, j)).all(|j| self.get(i, j).is_some()))
    }
}

/// Mean of `QKᵀ/√d_h` over the causally valid token pairs of every reachable
/// block, accumulated in `f64` directly from the inputs.
pub fn block_mean_scores<T: Real>(
    input: &AttentionInput<T>,
    block_size: usize,
) -> Result<BlockScoreMap> {
    let geometry = BlockGeometry::new(input.len(), block_size)?;
    let n = geometry.n_blocks();
    let scale = 1.0 / (input.head_dim() as f64).sqrt();
    let mut map = BlockScoreMap::new_skipped(geometry, input.causal());
    for i in 0..n {
        for j in 0..n {
            if !map.is_reachable(i, j) {
                continue;
            }
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for r in geometry.range(i) {
                let q = input.q().row(r);
                let cols = geometry.range(j);
                let end = cols.end.min(input.key_limit(r));
                for c in cols.start..end {
                    let k = input.k().row(c);
                    let s: f64 = q.iter().zip(k).map(|(a, b)| a.widen() * b.widen()).sum();
                    sum += s * scale;
                    count += 1;
                }
            }
            map.set(i, j, sum / count as f64);
        }
    }
    Ok(map)
}
