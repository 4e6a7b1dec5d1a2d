use serde::Serialize;

use crate::error::{Error, Result};

/// Pooled-feature block estimate against exact block means for 1-d features.
///
/// In one dimension `pool(Q)·pool(K)` is algebraically the mean over *all*
/// token pairs, so that mean can never disagree with the pooled estimate. The
/// reference reported as `true_block_mean` is the position-aligned mean
/// `mean_i q_i·k_i`, which is what pooling discards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoolingDiagnostic {
    pub pooled_product: f64,
    pub true_block_mean: f64,
    pub all_pairs_mean: f64,
    /// Mean over pairs with key index ≤ query index.
    pub causal_pairs_mean: f64,
}

impl PoolingDiagnostic {
    /// `+1` overestimation, `-1` underestimation, `0` exact.
    pub fn estimate_sign(&self) -> i8 {
        let diff = self.pooled_product - self.true_block_mean;
        if diff.abs() <= 1e-12 {
            0
        } else if diff > 0.0 {
            1
        } else {
            -1
        }
    }
}

pub fn pooling_estimate_diagnostic(q: &[f64], k: &[f64]) -> Result<PoolingDiagnostic> {
    if q.len() != k.len() || q.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need equal, nonzero token counts (got {} and {})",
            q.len(),
            k.len()
        )));
    }
    let n = q.len() as f64;
    let pooled_product = q.iter().sum::<f64>() * k.iter().sum::<f64>() / (n * n);
    let true_block_mean = q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / n;

    let mut all = 0.0;
    let mut causal = 0.0;
    let mut causal_count = 0usize;
    for (i, &qi) in q.iter().enumerate() {
        for (j, &kj) in k.iter().enumerate() {
            all += qi * kj;
            if j <= i {
                causal += qi * kj;
                causal_count += 1;
            }
        }
    }
    Ok(PoolingDiagnostic {
        pooled_product,
        true_block_mean,
        all_pairs_mean: all / (n * n),
        causal_pairs_mean: causal / causal_count as f64,
    })
}
