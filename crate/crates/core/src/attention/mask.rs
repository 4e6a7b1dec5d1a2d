use std::ops::Range;

use crate::error::{Error, Result};

/// Tiling of `n_tokens` positions into blocks of `block_size`; the final block
/// may be ragged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct BlockGeometry {
    pub n_tokens: usize,
    pub block_size: usize,
}

impl BlockGeometry {
    pub fn new(n_tokens: usize, block_size: usize) -> Result<Self> {
        if n_tokens == 0 || block_size == 0 {
            return Err(Error::InvalidInput("n_tokens and block_size must be positive".into()));
        }
        Ok(Self { n_tokens, block_size })
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.n_tokens.div_ceil(self.block_size)
    }

    /// Token range covered by block `b`.
    #[inline]
    pub fn range(&self, b: usize) -> Range<usize> {
        let start = b * self.block_size;
        start..(start + self.block_size).min(self.n_tokens)
    }

    #[inline]
    pub fn block_of(&self, token: usize) -> usize {
        token / self.block_size
    }

    /// Number of blocks on or below the diagonal.
    pub fn causal_blocks(&self) -> usize {
        let n = self.n_blocks();
        n * (n + 1) / 2
    }
}

/// Boolean grid over (query block × key block).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockMask {
    geometry: BlockGeometry,
    grid: Vec<bool>,
}

impl BlockMask {
    pub fn empty(geometry: BlockGeometry) -> Self {
        let n = geometry.n_blocks();
        Self { geometry, grid: vec![false; n * n] }
    }

    /// Every block on or below the diagonal.
    pub fn full_causal(geometry: BlockGeometry) -> Self {
        let mut m = Self::empty(geometry);
        let n = m.n_blocks();
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, true);
            }
        }
        m
    }

    /// Every block, including those above the diagonal.
    pub fn full(geometry: BlockGeometry) -> Self {
        let n = geometry.n_blocks();
        Self { geometry, grid: vec![true; n * n] }
    }

    pub fn from_fn(geometry: BlockGeometry, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(geometry);
        let n = m.n_blocks();
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn geometry(&self) -> BlockGeometry {
        self.geometry
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.geometry.n_blocks()
    }

    #[inline]
    pub fn block_size(&self) -> usize {
        self.geometry.block_size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.grid[i * self.n_blocks() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        let n = self.n_blocks();
        self.grid[i * n + j] = on;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        let n = self.n_blocks();
        &self.grid[i * n..(i + 1) * n]
    }

    pub fn popcount(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    /// Set bits on or below the diagonal.
    pub fn causal_popcount(&self) -> usize {
        let n = self.n_blocks();
        (0..n).map(|i| self.row(i)[..=i].iter().filter(|&&b| b).count()).sum()
    }

    /// Fraction of causal blocks that are set.
    pub fn causal_density(&self) -> f64 {
        self.causal_popcount() as f64 / self.geometry.causal_blocks() as f64
    }

    pub fn is_causal(&self) -> bool {
        let n = self.n_blocks();
        (0..n).all(|i| self.row(i)[i + 1..].iter().all(|&b| !b))
    }

    pub fn union_with(&mut self, other: &BlockMask) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.grid.iter_mut().zip(&other.grid) {
            *a |= *b;
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &BlockMask) -> usize {
        self.grid.iter().zip(&other.grid).filter(|(a, b)| **a && **b).count()
    }

    pub fn union_count(&self, other: &BlockMask) -> usize {
        self.grid.iter().zip(&other.grid).filter(|(a, b)| **a || **b).count()
    }

    pub fn is_superset_of(&self, other: &BlockMask) -> bool {
        self.grid.iter().zip(&other.grid).all(|(a, b)| *a || !*b)
    }

    pub fn check_same_shape(&self, other: &BlockMask) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::ShapeMismatch(format!(
                "mask geometries differ: {:?} vs {:?}",
                self.geometry, other.geometry
            )));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.grid
    }
}
