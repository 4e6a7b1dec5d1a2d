use std::collections::BTreeMap;

use crate::attention::{BlockGeometry, BlockMask, BlockScoreMap};
use crate::cluster::{ClusterId, HeadDict};
use crate::error::{Error, Result};
use crate::pattern::{sanitize_mask, select_cumulative, ProbVector};

/// A cluster's shared pattern: the last-row block distribution of the head it
/// was built from, plus the selected block mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotalEntry {
    pub a_tilde: ProbVector,
    pub mask: BlockMask,
}

/// Per-pass store of pivotal patterns keyed by cluster id.
#[derive(Debug, Clone, Default)]
pub struct PivotalPatternDict {
    entries: BTreeMap<ClusterId, PivotalEntry>,
}

impl PivotalPatternDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn get(&self, cluster: ClusterId) -> Option<&PivotalEntry> {
        self.entries.get(&cluster)
    }

    pub fn contains(&self, cluster: ClusterId) -> bool {
        self.entries.contains_key(&cluster)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clusters(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.entries.keys().copied()
    }

    /// Stores `entry`, replacing any previous one. The noise cluster is refused.
    pub fn insert(&mut self, head_dict: &HeadDict, cluster: ClusterId, entry: PivotalEntry) -> Result<()> {
        if head_dict.is_noise(cluster) {
            return Err(Error::Contract("the noise cluster cannot hold a pivotal pattern".into()));
        }
        if entry.a_tilde.len() != entry.mask.n_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "representative has {} cells for a {}-block mask",
                entry.a_tilde.len(),
                entry.mask.n_blocks()
            )));
        }
        self.entries.insert(cluster, entry);
        Ok(())
    }
}

/// Cumulative selection over a grid of per-block attention probabilities,
/// flattened row-major and globally normalized. No sanitization.
pub fn select_blocks(geometry: BlockGeometry, probs: &[f64], gamma: f64) -> Result<BlockMask> {
    let n = geometry.n_blocks();
    if probs.len() != n * n {
        return Err(Error::ShapeMismatch(format!("{} cells for a {n}x{n} grid", probs.len())));
    }
    let mut mask = BlockMask::empty(geometry);
    for idx in select_cumulative(probs, gamma)? {
        mask.set(idx / n, idx % n, true);
    }
    Ok(mask)
}

/// [`select_blocks`] followed by sanitization.
pub fn mask_from_block_probs(geometry: BlockGeometry, probs: &[f64], gamma: f64) -> Result<BlockMask> {
    Ok(sanitize_mask(&select_blocks(geometry, probs, gamma)?))
}

/// Row-wise softmax of fully computed block-mean scores over reachable
/// blocks, flattened row-major; unreachable cells are zero.
pub fn block_probabilities(stats: &BlockScoreMap) -> Result<Vec<f64>> {
    if !stats.is_fully_computed() {
        return Err(Error::InvalidInput("block statistics are not fully computed".into()));
    }
    let n = stats.n_blocks();
    let mut probs = vec![0.0f64; n * n];
    for i in 0..n {
        let reach: Vec<usize> = (0..n).filter(|&j| stats.is_reachable(i, j)).collect();
        let logits: Vec<f64> = reach.iter().map(|&j| stats.raw(i, j)).collect();
        let row = ProbVector::softmax(&logits)?;
        for (&j, &p) in reach.iter().zip(row.as_slice()) {
            probs[i * n + j] = p;
        }
    }
    Ok(probs)
}

/// Builds `(ã, M)` from the block-mean scores of a fully computed head:
/// row-wise softmax over reachable blocks, last row as representative, then
/// cumulative selection over the whole normalized map.
pub fn pivotal_from_stats(stats: &BlockScoreMap, gamma: f64) -> Result<PivotalEntry> {
    let probs = block_probabilities(stats)?;
    let n = stats.n_blocks();
    let a_tilde = ProbVector::normalized(probs[(n - 1) * n..].to_vec())?;
    let mask = mask_from_block_probs(stats.geometry(), &probs, gamma)?;
    Ok(PivotalEntry { a_tilde, mask })
}

/// Updates the cluster's pivotal entry from a fully computed head. Returns
/// whether the dictionary changed; partially computed heads and noise-cluster
/// heads leave it untouched.
pub fn construct_pivotal_pattern(
    stats: &BlockScoreMap,
    gamma: f64,
    layer: usize,
    head: usize,
    head_dict: &HeadDict,
    dict: &mut PivotalPatternDict,
) -> Result<bool> {
    let cluster = head_dict.cluster_of(layer, head)?;
    if head_dict.is_noise(cluster) || !stats.is_fully_computed() {
        return Ok(false);
    }
    let entry = pivotal_from_stats(stats, gamma)?;
    dict.insert(head_dict, cluster, entry)?;
    Ok(true)
}

/// Mask returned for a head whose pattern decision was `SharedPivot`.
#[derive(Debug, Clone, PartialEq)]
pub enum SharedPattern {
    /// The cluster's stored pivotal mask.
    Pivotal(BlockMask),
    /// No entry yet: compute this head densely so it can seed the cluster.
    DenseSeed(BlockMask),
}

impl SharedPattern {
    pub fn mask(&self) -> &BlockMask {
        match self {
            SharedPattern::Pivotal(m) | SharedPattern::DenseSeed(m) => m,
        }
    }

    pub fn into_mask(self) -> BlockMask {
        match self {
            SharedPattern::Pivotal(m) | SharedPattern::DenseSeed(m) => m,
        }
    }

    pub fn is_dense_seed(&self) -> bool {
        matches!(self, SharedPattern::DenseSeed(_))
    }
}

pub fn share_pivotal_pattern(
    layer: usize,
    head: usize,
    head_dict: &HeadDict,
    dict: &PivotalPatternDict,
    geometry: BlockGeometry,
) -> Result<SharedPattern> {
    let cluster = head_dict.cluster_of(layer, head)?;
    if head_dict.is_noise(cluster) {
        return Err(Error::Contract(format!(
            "noise-cluster head (layer {layer}, head {head}) cannot share a pivotal pattern"
        )));
    }
    match dict.get(cluster) {
        Some(entry) => {
            if entry.mask.geometry() != geometry {
                return Err(Error::ShapeMismatch(format!(
                    "stored pattern has geometry {:?}, head needs {:?}",
                    entry.mask.geometry(),
                    geometry
                )));
            }
            Ok(SharedPattern::Pivotal(entry.mask.clone()))
        }
        None => Ok(SharedPattern::DenseSeed(BlockMask::full_causal(geometry))),
    }
}
