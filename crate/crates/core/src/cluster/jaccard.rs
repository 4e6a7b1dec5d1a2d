use serde::Serialize;

use crate::attention::{block_mean_scores, AttentionInput, BlockMask};
use crate::error::Result;
use crate::pattern::{block_probabilities, select_blocks};
use crate::tensor::Real;

/// A head's own attention pattern for similarity measurement: block-mean
/// scores over every reachable block, row-wise softmax, then cumulative
/// selection at `gamma`. Not sanitized, since the forced diagonal and first
/// column would be shared by every head.
pub fn attention_pattern_mask<T: Real>(input: &AttentionInput<T>, block_size: usize, gamma: f64) -> Result<BlockMask> {
    let stats = block_mean_scores(input, block_size)?;
    select_blocks(stats.geometry(), &block_probabilities(&stats)?, gamma)
}

/// `|A ∩ B| / |A ∪ B|`; `None` when both masks are empty.
pub fn jaccard(a: &BlockMask, b: &BlockMask) -> Result<Option<f64>> {
    a.check_same_shape(b)?;
    let union = a.union_count(b);
    Ok((union > 0).then(|| a.intersection_count(b) as f64 / union as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JaccardMatrix {
    pub values: Vec<Vec<f64>>,
    /// Off-diagonal pairs where both masks were empty (reported as 0).
    pub empty_pairs: Vec<(usize, usize)>,
}

impl JaccardMatrix {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn jaccard_similarity_matrix(masks: &[BlockMask]) -> Result<JaccardMatrix> {
    let n = masks.len();
    let mut values = vec![vec![0.0; n]; n];
    let mut empty_pairs = Vec::new();
    for a in 0..n {
        values[a][a] = 1.0;
        for b in a + 1..n {
            let v = match jaccard(&masks[a], &masks[b])? {
                Some(v) => v,
                None => {
                    empty_pairs.push((a, b));
                    0.0
                }
            };
            values[a][b] = v;
            values[b][a] = v;
        }
    }
    Ok(JaccardMatrix { values, empty_pairs })
}
