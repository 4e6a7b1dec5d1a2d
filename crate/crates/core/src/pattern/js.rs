use crate::error::{Error, Result};
use crate::pattern::ProbVector;

/// Jensen–Shannon distance with base-2 logarithms: `√JSD(p ∥ q) ∈ [0, 1]`,
/// reaching 1 exactly for distributions with disjoint support.
pub fn js_distance(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "distributions have different lengths ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    let mut divergence = 0.0;
    for (&a, &b) in p.as_slice().iter().zip(q.as_slice()) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            divergence += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            divergence += 0.5 * b * (b / m).log2();
        }
    }
    Ok(divergence.clamp(0.0, 1.0).sqrt())
}
