//! Tiled block-sparse attention with streaming (online) softmax.
//!
//! Each query block walks its computed key blocks left to right, keeping a
//! running row max and normalizer. Scores for a tile are formed once and feed
//! both the softmax update and the block's mean-score statistic, so the N×N
//! score matrix is never materialized. Query blocks are independent and run in
//! parallel; each block's reduction order is fixed, so the result does not
//! depend on scheduling.

use rayon::prelude::*;

use crate::attention::{AttentionInput, BlockMask, BlockScoreMap};
use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix, Real};

#[derive(Debug, Clone)]
pub struct SparseAttentionOutput<T> {
    pub output: Matrix<T>,
    pub stats: BlockScoreMap,
    pub computed_blocks: usize,
    pub total_causal_blocks: usize,
}

impl<T> SparseAttentionOutput<T> {
    pub fn density(&self) -> f64 {
        self.computed_blocks as f64 / self.total_causal_blocks as f64
    }
}

pub fn sparse_attention<T: Real>(
    input: &AttentionInput<T>,
    mask: &BlockMask,
) -> Result<SparseAttentionOutput<T>> {
    let geometry = mask.geometry();
    if geometry.n_tokens != input.len() {
        return Err(Error::ShapeMismatch(format!(
            "mask covers {} tokens, input has {}",
            geometry.n_tokens,
            input.len()
        )));
    }
    let n = geometry.n_blocks();
    let causal = input.causal();
    let visible = |i: usize, j: usize| mask.get(i, j) && (!causal || j <= i);

    if let Some(row_block) = (0..n).find(|&i| !(0..n).any(|j| visible(i, j))) {
        return Err(Error::DegenerateMask { row_block });
    }

    let d = input.head_dim();
    let bs = geometry.block_size;
    let scale = input.scale();
    let mut output = Matrix::<T>::zeros(input.len(), d);
    let mut stats = vec![BlockScoreMap::NEG_INF; n * n];

    let computed_blocks: usize = output
        .as_mut_slice()
        .par_chunks_mut(bs * d)
        .zip(stats.par_chunks_mut(n))
        .enumerate()
        .map(|(i, (out_tile, stats_row))| {
            let rows = geometry.range(i);
            let height = rows.len();
            let mut row_max = vec![f64::NEG_INFINITY; height];
            let mut row_norm = vec![0.0f64; height];
            let mut acc = vec![0.0f64; height * d];
            let mut tile = vec![0.0f64; bs];
            let mut computed = 0;

            for j in (0..n).filter(|&j| visible(i, j)) {
                computed += 1;
                let cols = geometry.range(j);
                let mut block_sum = 0.0f64;
                let mut block_count = 0usize;

                for (local, r) in rows.clone().enumerate() {
                    let end = cols.end.min(input.key_limit(r));
                    if end <= cols.start {
                        continue;
                    }
                    let width = end - cols.start;
                    let q = input.q().row(r);
                    let mut tile_max = f64::NEG_INFINITY;
                    for (t, c) in (cols.start..end).enumerate() {
                        let s = (dot(q, input.k().row(c)) * scale).widen();
                        tile[t] = s;
                        block_sum += s;
                        tile_max = tile_max.max(s);
                    }
                    block_count += width;

                    let new_max = row_max[local].max(tile_max);
                    let rescale = (row_max[local] - new_max).exp();
                    let acc_row = &mut acc[local * d..(local + 1) * d];
                    if rescale != 1.0 {
                        row_norm[local] *= rescale;
                        acc_row.iter_mut().for_each(|a| *a *= rescale);
                    }
                    for (t, c) in (cols.start..end).enumerate() {
                        let p = (tile[t] - new_max).exp();
                        row_norm[local] += p;
                        for (a, &x) in acc_row.iter_mut().zip(input.v().row(c)) {
                            *a += p * x.widen();
                        }
                    }
                    row_max[local] = new_max;
                }
                stats_row[j] = block_sum / block_count as f64;
            }

            for local in 0..height {
                let norm = row_norm[local];
                let out_row = &mut out_tile[local * d..(local + 1) * d];
                for (o, a) in out_row.iter_mut().zip(&acc[local * d..(local + 1) * d]) {
                    *o = T::narrow(a / norm);
                }
            }
            computed
        })
        .sum();

    let total_causal_blocks = if causal { geometry.causal_blocks() } else { n * n };
    Ok(SparseAttentionOutput {
        output,
        stats: BlockScoreMap::from_grid(geometry, causal, stats),
        computed_blocks,
        total_causal_blocks,
    })
}
