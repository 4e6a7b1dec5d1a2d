use serde::{Deserialize, Serialize};

use crate::attention::{AttentionInput, BlockGeometry};
use crate::cluster::HeadDict;
use crate::error::Result;
use crate::pattern::{js_distance, PivotalPatternDict, ProbVector, Thresholds};
use crate::tensor::{dot, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    SharedPivot,
    VerticalSlash,
}

/// Which gate sent a head to the vertical-slash fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    NoiseCluster,
    HighlySparse,
    Dissimilar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternDecision {
    pub kind: PatternKind,
    /// JS distance from the uniform distribution.
    pub d_sparse: Option<f64>,
    /// JS distance from the cluster's pivotal representative.
    pub d_sim: Option<f64>,
    pub fallback: Option<FallbackReason>,
}

impl PatternDecision {
    fn vertical_slash(d_sparse: f64, d_sim: Option<f64>, reason: FallbackReason) -> Self {
        Self { kind: PatternKind::VerticalSlash, d_sparse: Some(d_sparse), d_sim, fallback: Some(reason) }
    }
}

/// Key-block distribution of the last query block: scaled QK scores are
/// mean-pooled per key block over causally valid pairs, then softmaxed.
pub fn estimate_last_block_distribution<T: Real>(
    input: &AttentionInput<T>,
    block_size: usize,
) -> Result<ProbVector> {
    let geometry = BlockGeometry::new(input.len(), block_size)?;
    let n = geometry.n_blocks();
    let scale = input.scale();
    let mut sums = vec![0.0f64; n];
    let mut counts = vec![0usize; n];
    for r in geometry.range(n - 1) {
        let q = input.q().row(r);
        for c in 0..input.key_limit(r) {
            let j = geometry.block_of(c);
            sums[j] += (dot(q, input.k().row(c)) * scale).widen();
            counts[j] += 1;
        }
    }
    let pooled: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &cnt)| cnt > 0)
        .map(|(s, &cnt)| s / cnt as f64)
        .collect();
    ProbVector::softmax(&pooled)
}

/// Chooses between sharing the cluster's pivotal pattern and searching a
/// vertical-slash pattern for this head.
pub fn determine_sparse_pattern(
    a_hat: &ProbVector,
    layer: usize,
    head: usize,
    head_dict: &HeadDict,
    dict: &PivotalPatternDict,
    thresholds: &Thresholds,
) -> Result<PatternDecision> {
    let cluster = head_dict.cluster_of(layer, head)?;
    let d_sparse = js_distance(a_hat, &ProbVector::uniform(a_hat.len()))?;
    if head_dict.is_noise(cluster) {
        return Ok(PatternDecision::vertical_slash(d_sparse, None, FallbackReason::NoiseCluster));
    }
    if d_sparse >= thresholds.delta {
        return Ok(PatternDecision::vertical_slash(d_sparse, None, FallbackReason::HighlySparse));
    }
    let Some(entry) = dict.get(cluster) else {
        return Ok(PatternDecision {
            kind: PatternKind::SharedPivot,
            d_sparse: Some(d_sparse),
            d_sim: None,
            fallback: None,
        });
    };
    let d_sim = js_distance(a_hat, &entry.a_tilde)?;
    if d_sim < thresholds.tau {
        Ok(PatternDecision {
            kind: PatternKind::SharedPivot,
            d_sparse: Some(d_sparse),
            d_sim: Some(d_sim),
            fallback: None,
        })
    } else {
        Ok(PatternDecision::vertical_slash(d_sparse, Some(d_sim), FallbackReason::Dissimilar))
    }
}
