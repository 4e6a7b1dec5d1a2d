use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterId, HeadDict, HeadDictMeta};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Average,
    Complete,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Clusters are merged while their linkage distance is at most this value.
    pub distance_threshold: f64,
    /// Smaller clusters are folded into the noise cluster.
    pub min_cluster_size: usize,
    pub linkage: Linkage,
}

impl ClusterParams {
    /// Calibrated for unit-norm flattened maps on the synthetic template suite.
    pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 0.6;

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold > 0.0 && self.distance_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "distance_threshold must be positive, got {}",
                self.distance_threshold
            )));
        }
        if self.min_cluster_size == 0 {
            return Err(Error::Config("min_cluster_size must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            distance_threshold: Self::DEFAULT_DISTANCE_THRESHOLD,
            min_cluster_size: 5,
            linkage: Linkage::Average,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Agglomerative clustering cut at `params.distance_threshold`.
///
/// Returns one label per item: clusters of at least `min_cluster_size` members
/// are numbered `0..k` in order of their first member; every other item gets
/// label `k` (noise). Equal distances merge the pair with the smallest first
/// members first.
pub fn agglomerate(embeddings: &[Vec<f64>], params: &ClusterParams) -> Result<(Vec<usize>, usize)> {
    params.validate()?;
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 embeddings, got {n}")));
    }
    let dim = embeddings[0].len();
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(Error::ShapeMismatch("embeddings differ in dimension".into()));
    }

    let mut dist = vec![0.0f64; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let d = euclidean(&embeddings[a], &embeddings[b]);
            dist[a * n + b] = d;
            dist[b * n + a] = d;
        }
    }
    // Slot `a` holds the cluster whose first member is `a`; merged slots go inactive.
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if members[a].is_none() {
                continue;
            }
            for b in a + 1..n {
                if members[b].is_none() {
                    continue;
                }
                let d = dist[a * n + b];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((d, a, b)) = best else { break };
        if d > params.distance_threshold {
            break;
        }
        let mb = members[b].take().expect("active slot");
        let (na, nb) = (members[a].as_ref().map_or(0, Vec::len) as f64, mb.len() as f64);
        for k in 0..n {
            if k == a || k == b || members[k].is_none() {
                continue;
            }
            let (dak, dbk) = (dist[a * n + k], dist[b * n + k]);
            let merged = match params.linkage {
                Linkage::Single => dak.min(dbk),
                Linkage::Complete => dak.max(dbk),
                Linkage::Average => (na * dak + nb * dbk) / (na + nb),
            };
            dist[a * n + k] = merged;
            dist[k * n + a] = merged;
        }
        members[a].as_mut().expect("active slot").extend(mb);
    }

    let clusters: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    let real: Vec<&Vec<usize>> = clusters.iter().filter(|c| c.len() >= params.min_cluster_size).collect();
    let noise = real.len();
    let mut labels = vec![noise; n];
    for (id, cluster) in real.iter().enumerate() {
        for &m in cluster.iter() {
            labels[m] = id;
        }
    }
    Ok((labels, noise))
}

/// Clusters head embeddings into a [`HeadDict`]; `heads[i]` is the
/// `(layer, head)` of `embeddings[i]`.
pub fn hierarchical_cluster(
    heads: &[(usize, usize)],
    embeddings: &[Vec<f64>],
    params: &ClusterParams,
) -> Result<HeadDict> {
    if heads.len() != embeddings.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} heads for {} embeddings",
            heads.len(),
            embeddings.len()
        )));
    }
    let (labels, noise) = agglomerate(embeddings, params)?;
    let mut assignment = BTreeMap::new();
    for (&key, &label) in heads.iter().zip(&labels) {
        if assignment.insert(key, label as ClusterId).is_some() {
            return Err(Error::InvalidInput(format!("head {key:?} appears twice")));
        }
    }
    Ok(HeadDict::new(
        assignment,
        noise as ClusterId,
        HeadDictMeta {
            min_cluster_size: params.min_cluster_size,
            distance_threshold: params.distance_threshold,
            embedder: "unspecified".into(),
            calibration: None,
        },
    ))
}
