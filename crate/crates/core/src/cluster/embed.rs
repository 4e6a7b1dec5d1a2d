use crate::cluster::AttentionMapRecord;
use crate::error::{Error, Result};

/// Maps a calibration record to a fixed-length vector for clustering.
pub trait MapEmbedder: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, record: &AttentionMapRecord) -> Result<Vec<f64>>;
}

/// Flattens the pooled map and scales it to unit L2 norm.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlattenL2Embedder;

impl FlattenL2Embedder {
    pub const ID: &'static str = "flatten-l2";
}

impl MapEmbedder for FlattenL2Embedder {
    fn id(&self) -> &str {
        Self::ID
    }

    fn embed(&self, record: &AttentionMapRecord) -> Result<Vec<f64>> {
        let norm = record.map.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput(format!(
                "attention map of (layer {}, head {}) has zero or non-finite norm",
                record.layer, record.head
            )));
        }
        Ok(record.map.iter().map(|x| x / norm).collect())
    }
}

pub fn embedder_by_id(id: &str) -> Result<Box<dyn MapEmbedder>> {
    match id {
        FlattenL2Embedder::ID => Ok(Box::new(FlattenL2Embedder)),
        other => Err(Error::Config(format!("unknown embedder '{other}'"))),
    }
}

/// Embeds with the default embedder.
pub fn embed_map(record: &AttentionMapRecord) -> Result<Vec<f64>> {
    FlattenL2Embedder.embed(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(map: Vec<f64>) -> AttentionMapRecord {
        AttentionMapRecord::new(0, 0, 2, map).unwrap()
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let r = rec(vec![1.0, 0.0, 0.3, 0.7]);
        let e = embed_map(&r).unwrap();
        assert!((e.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(e, embed_map(&r.clone()).unwrap());
    }

    #[test]
    fn disjoint_support_is_orthogonal() {
        let a = embed_map(&rec(vec![1.0, 0.0, 1.0, 0.0])).unwrap();
        let b = embed_map(&rec(vec![0.0, 1.0, 0.0, 1.0])).unwrap();
        assert_eq!(a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>(), 0.0);
    }

    #[test]
    fn zero_map_rejected() {
        assert!(embed_map(&rec(vec![0.0; 4])).is_err());
        assert!(embedder_by_id("autoencoder").is_err());
        assert_eq!(embedder_by_id("flatten-l2").unwrap().id(), "flatten-l2");
    }
}
