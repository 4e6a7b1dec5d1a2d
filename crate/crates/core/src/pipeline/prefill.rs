use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{dense_attention, sparse_attention, BlockGeometry, BlockMask};
use crate::cluster::HeadDict;
use crate::error::Result;
use crate::pattern::{
    construct_pivotal_pattern, determine_sparse_pattern, estimate_last_block_distribution,
    search_vertical_slash, share_pivotal_pattern, PatternKind, PivotalPatternDict, SharedPattern, Thresholds,
};
use crate::pipeline::{
    HeadPattern, HeadResult, HeadTimings, PatternCounts, RunAggregate, RunConfig, RunTrace, SynthModel,
    TRACE_VERSION,
};
use crate::tensor::{Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Pattern selection and the block-sparse kernel.
    Sparse,
    /// Full attention for every head.
    Dense,
    /// Sparse, plus a dense reference per head for error measurement.
    Both,
}

/// Outputs of one prefill pass, in (layer, head) order.
#[derive(Debug, Clone)]
pub struct PrefillRun {
    pub outputs: Vec<Matrix<f32>>,
    /// Mask each head ran with.
    pub masks: Vec<BlockMask>,
    pub trace: RunTrace,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs every head of `model` layer by layer, heads in ascending index, with
/// a pivotal dictionary that lives for this pass only.
pub fn run_prefill(
    model: &SynthModel,
    head_dict: &HeadDict,
    thresholds: &Thresholds,
    mode: RunMode,
) -> Result<PrefillRun> {
    let spec = model.spec();
    thresholds.validate()?;
    head_dict.check_covers(spec.num_layers, spec.num_heads)?;
    let geometry = BlockGeometry::new(spec.n_tokens, spec.block_size)?;
    let started = Instant::now();

    let mut dict = PivotalPatternDict::new();
    let mut outputs = Vec::with_capacity(spec.total_heads());
    let mut masks = Vec::with_capacity(spec.total_heads());
    let mut heads = Vec::with_capacity(spec.total_heads());

    for (layer, head) in model.heads() {
        let input = model.head_input(layer, head);
        let cluster = head_dict.cluster_of(layer, head)?;
        let noise = head_dict.is_noise(cluster);
        let mut timings = HeadTimings::default();

        if mode == RunMode::Dense {
            let t = Instant::now();
            let out = dense_attention(&input)?;
            timings.dense_ms = Some(ms_since(t));
            let total = geometry.causal_blocks();
            heads.push(HeadResult {
                layer,
                head,
                cluster,
                noise,
                pattern: HeadPattern::Dense,
                decision: None,
                dense_seed: false,
                computed_blocks: total,
                total_blocks: total,
                density: 1.0,
                updated_pivot: false,
                rel_error_vs_dense: None,
                timings,
            });
            outputs.push(out);
            masks.push(BlockMask::full_causal(geometry));
            continue;
        }

        let t = Instant::now();
        let a_hat = estimate_last_block_distribution(&input, spec.block_size)?;
        let decision = determine_sparse_pattern(&a_hat, layer, head, head_dict, &dict, thresholds)?;
        timings.estimate_ms = ms_since(t);

        let t = Instant::now();
        let (mask, pattern, dense_seed) = match decision.kind {
            PatternKind::SharedPivot => match share_pivotal_pattern(layer, head, head_dict, &dict, geometry)? {
                SharedPattern::DenseSeed(m) => (m, HeadPattern::Dense, true),
                SharedPattern::Pivotal(m) => (m, HeadPattern::Shared, false),
            },
            PatternKind::VerticalSlash => {
                (search_vertical_slash(&input, thresholds.gamma, spec.block_size)?, HeadPattern::VerticalSlash, false)
            }
        };
        timings.pattern_ms = ms_since(t);

        let t = Instant::now();
        let sparse = sparse_attention(&input, &mask)?;
        timings.kernel_ms = ms_since(t);

        let updated_pivot =
            construct_pivotal_pattern(&sparse.stats, thresholds.gamma, layer, head, head_dict, &mut dict)?;

        let rel_error_vs_dense = if mode == RunMode::Both {
            let t = Instant::now();
            let dense = dense_attention(&input)?;
            timings.dense_ms = Some(ms_since(t));
            Some(sparse.output.relative_error(&dense))
        } else {
            None
        };

        log::debug!(
            "layer {layer} head {head}: {pattern:?} density {:.3} d_sparse {:?} d_sim {:?}",
            sparse.density(),
            decision.d_sparse,
            decision.d_sim
        );
        heads.push(HeadResult {
            layer,
            head,
            cluster,
            noise,
            pattern,
            decision: Some(decision),
            dense_seed,
            computed_blocks: sparse.computed_blocks,
            total_blocks: sparse.total_causal_blocks,
            density: sparse.density(),
            updated_pivot,
            rel_error_vs_dense,
            timings,
        });
        outputs.push(sparse.output);
        masks.push(mask);
    }

    let computed_blocks = heads.iter().map(|h| h.computed_blocks).sum();
    let total_blocks = heads.iter().map(|h| h.total_blocks).sum();
    let aggregate = RunAggregate {
        total_density: computed_blocks as f64 / total_blocks as f64,
        computed_blocks,
        total_blocks,
        counts: PatternCounts::tally(&heads),
        wall_clock_ms: ms_since(started),
    };
    let trace = RunTrace {
        version: TRACE_VERSION,
        config: RunConfig { model: spec.clone(), thresholds: *thresholds, mode, precision: f32::NAME.into() },
        heads,
        aggregate,
    };
    Ok(PrefillRun { outputs, masks, trace })
}
