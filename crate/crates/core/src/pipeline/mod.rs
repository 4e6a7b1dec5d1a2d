//! Layer-by-layer prefill over a synthetic multi-head model.

mod metrics;
mod prefill;
mod synth;
mod trace;

pub use metrics::{compute_metrics, ErrorSummary, Metrics};
pub use prefill::{run_prefill, PrefillRun, RunMode};
pub use synth::{synth_model_generate, ModelSpec, SynthHead, SynthModel, SynthStructure, Template};
pub use trace::{HeadPattern, HeadResult, HeadTimings, PatternCounts, RunAggregate, RunConfig, RunTrace, TRACE_VERSION};
