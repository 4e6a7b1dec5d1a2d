//! Offline head clustering: calibration maps, embeddings, agglomerative
//! clustering into a static head dictionary, and Jaccard pattern similarity.

mod amap;
mod ari;
mod embed;
mod headdict;
mod hierarchical;
mod jaccard;
mod record;

pub use amap::{read_amap, write_amap, AmapFile, AMAP_MAGIC};
pub use ari::{adjusted_rand_index, same_partition};
pub use embed::{embed_map, embedder_by_id, FlattenL2Embedder, MapEmbedder};
pub use headdict::{load_head_dict, save_head_dict, ClusterId, HeadDict, HeadDictMeta, HEAD_DICT_VERSION};
pub use hierarchical::{agglomerate, hierarchical_cluster, ClusterParams, Linkage};
pub use jaccard::{attention_pattern_mask, jaccard, jaccard_similarity_matrix, JaccardMatrix};
pub use record::{record_calibration, AttentionMapRecord, DEFAULT_RESOLUTION};

use crate::error::Result;

/// Embeds every record and clusters the embeddings into a head dictionary.
pub fn cluster_records(
    records: &[AttentionMapRecord],
    embedder: &dyn MapEmbedder,
    params: &ClusterParams,
) -> Result<HeadDict> {
    let embeddings = records.iter().map(|r| embedder.embed(r)).collect::<Result<Vec<_>>>()?;
    let heads: Vec<(usize, usize)> = records.iter().map(|r| (r.layer, r.head)).collect();
    let mut dict = hierarchical_cluster(&heads, &embeddings, params)?;
    dict.meta_mut().embedder = embedder.id().to_string();
    Ok(dict)
}
