use serde::{Deserialize, Serialize};

use crate::pipeline::{PatternCounts, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub density: f64,
    pub counts: PatternCounts,
    /// Mean density per layer.
    pub layer_density: Vec<f64>,
    pub rel_error: Option<ErrorSummary>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    // nearest-rank
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn compute_metrics(trace: &RunTrace) -> Metrics {
    let computed: usize = trace.heads.iter().map(|h| h.computed_blocks).sum();
    let total: usize = trace.heads.iter().map(|h| h.total_blocks).sum();
    let layers = trace.config.model.num_layers;
    let layer_density = (0..layers)
        .map(|l| {
            let ds: Vec<f64> = trace.heads.iter().filter(|h| h.layer == l).map(|h| h.density).collect();
            if ds.is_empty() {
                0.0
            } else {
                ds.iter().sum::<f64>() / ds.len() as f64
            }
        })
        .collect();
    let mut errors: Vec<f64> = trace.heads.iter().filter_map(|h| h.rel_error_vs_dense).collect();
    errors.sort_by(f64::total_cmp);
    let rel_error = (!errors.is_empty()).then(|| ErrorSummary {
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        p50: percentile(&errors, 0.5),
        p90: percentile(&errors, 0.9),
        max: *errors.last().expect("nonempty"),
    });
    Metrics {
        density: if total == 0 { 0.0 } else { computed as f64 / total as f64 },
        counts: PatternCounts::tally(&trace.heads),
        layer_density,
        rel_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&v, 0.5), 5.0);
        assert_eq!(percentile(&v, 0.9), 9.0);
        assert_eq!(percentile(&v[..1], 0.9), 1.0);
    }
}
