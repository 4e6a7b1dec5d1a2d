//! Static (layer, head) → cluster map and its JSON file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClusterId = u32;

pub const HEAD_DICT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadDictMeta {
    pub min_cluster_size: usize,
    pub distance_threshold: f64,
    pub embedder: String,
    pub calibration: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadDict {
    assignment: BTreeMap<(usize, usize), ClusterId>,
    noise_cluster_id: ClusterId,
    meta: HeadDictMeta,
}

impl HeadDict {
    pub fn new(
        assignment: BTreeMap<(usize, usize), ClusterId>,
        noise_cluster_id: ClusterId,
        meta: HeadDictMeta,
    ) -> Self {
        Self { assignment, noise_cluster_id, meta }
    }

    /// Every head of a `layers × heads` model in one cluster (id 0); noise id 1.
    pub fn single_cluster(layers: usize, heads: usize) -> Self {
        Self::from_fn(layers, heads, 1, |_, _| 0)
    }

    pub fn from_fn(
        layers: usize,
        heads: usize,
        noise_cluster_id: ClusterId,
        mut f: impl FnMut(usize, usize) -> ClusterId,
    ) -> Self {
        let assignment =
            (0..layers).flat_map(|l| (0..heads).map(move |h| (l, h))).map(|k| (k, f(k.0, k.1))).collect();
        Self {
            assignment,
            noise_cluster_id,
            meta: HeadDictMeta {
                min_cluster_size: 1,
                distance_threshold: 0.0,
                embedder: "manual".into(),
                calibration: None,
            },
        }
    }

    pub fn cluster_of(&self, layer: usize, head: usize) -> Result<ClusterId> {
        self.assignment.get(&(layer, head)).copied().ok_or(Error::UnknownHead { layer, head })
    }

    #[inline]
    pub fn noise_cluster_id(&self) -> ClusterId {
        self.noise_cluster_id
    }

    #[inline]
    pub fn is_noise(&self, cluster: ClusterId) -> bool {
        cluster == self.noise_cluster_id
    }

    pub fn meta(&self) -> &HeadDictMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut HeadDictMeta {
        &mut self.meta
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), ClusterId)> + '_ {
        self.assignment.iter().map(|(&k, &v)| (k, v))
    }

    /// Distinct non-noise cluster ids.
    pub fn clusters(&self) -> BTreeSet<ClusterId> {
        self.assignment.values().copied().filter(|&c| !self.is_noise(c)).collect()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters().len()
    }

    pub fn members(&self, cluster: ClusterId) -> Vec<(usize, usize)> {
        self.iter().filter(|&(_, c)| c == cluster).map(|(k, _)| k).collect()
    }

    /// Errors unless every head of a `layers × heads` model is assigned.
    pub fn check_covers(&self, layers: usize, heads: usize) -> Result<()> {
        for l in 0..layers {
            for h in 0..heads {
                self.cluster_of(l, h)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HeadDictFile {
            version: HEAD_DICT_VERSION,
            noise_cluster_id: self.noise_cluster_id,
            min_cluster_size: self.meta.min_cluster_size,
            distance_threshold: self.meta.distance_threshold,
            embedder: self.meta.embedder.clone(),
            calibration: self.meta.calibration.clone(),
            assignment: self
                .iter()
                .map(|((layer, head), cluster)| AssignmentEntry { layer, head, cluster })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)
            .map_err(|e| Error::Malformed(format!("head dict: {e}")))?;
        if probe.version != HEAD_DICT_VERSION {
            return Err(Error::Version { found: probe.version, expected: HEAD_DICT_VERSION });
        }
        let file: HeadDictFile =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("head dict: {e}")))?;
        let mut assignment = BTreeMap::new();
        for e in file.assignment {
            if assignment.insert((e.layer, e.head), e.cluster).is_some() {
                return Err(Error::Malformed(format!(
                    "head (layer {}, head {}) assigned twice",
                    e.layer, e.head
                )));
            }
        }
        Ok(Self {
            assignment,
            noise_cluster_id: file.noise_cluster_id,
            meta: HeadDictMeta {
                min_cluster_size: file.min_cluster_size,
                distance_threshold: file.distance_threshold,
                embedder: file.embedder,
                calibration: file.calibration,
            },
        })
    }
}

pub fn save_head_dict(dict: &HeadDict, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dict.to_json()? + "\n")?;
    Ok(())
}

pub fn load_head_dict(path: impl AsRef<Path>) -> Result<HeadDict> {
    HeadDict::from_json(&fs::read_to_string(path)?)
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct HeadDictFile {
    version: u32,
    noise_cluster_id: ClusterId,
    min_cluster_size: usize,
    distance_threshold: f64,
    embedder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration: Option<String>,
    assignment: Vec<AssignmentEntry>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentEntry {
    layer: usize,
    head: usize,
    cluster: ClusterId,
}
