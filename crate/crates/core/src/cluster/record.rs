use rayon::prelude::*;

use crate::attention::AttentionInput;
use crate::error::{Error, Result};
use crate::tensor::{dot, Real};

pub const DEFAULT_RESOLUTION: usize = 128;

/// A head's dense attention map pooled to a fixed `R × R` grid; each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMapRecord {
    pub layer: usize,
    pub head: usize,
    pub resolution: usize,
    /// Row-major `R × R`.
    pub map: Vec<f64>,
}

impl AttentionMapRecord {
    pub fn new(layer: usize, head: usize, resolution: usize, map: Vec<f64>) -> Result<Self> {
        if resolution == 0 || map.len() != resolution * resolution {
            return Err(Error::ShapeMismatch(format!(
                "{} cells for resolution {resolution}",
                map.len()
            )));
        }
        Ok(Self { layer, head, resolution, map })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.map[i * self.resolution + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.map[i * self.resolution..(i + 1) * self.resolution]
    }
}

/// Runs each head densely and mean-pools its attention probabilities into an
/// `R × R` map (token `t` falls in bin `⌊t·R/N⌋`), then renormalizes rows.
pub fn record_calibration<'a, T: Real>(
    heads: &[(usize, usize, &'a AttentionInput<T>)],
    resolution: usize,
) -> Result<Vec<AttentionMapRecord>> {
    heads
        .par_iter()
        .map(|&(layer, head, input)| {
            let map = pooled_attention_map(input, resolution)?;
            AttentionMapRecord::new(layer, head, resolution, map)
        })
        .collect()
}

fn pooled_attention_map<T: Real>(input: &AttentionInput<T>, resolution: usize) -> Result<Vec<f64>> {
    let n = input.len();
    if resolution == 0 || n < resolution {
        return Err(Error::InvalidInput(format!(
            "calibration input has {n} tokens, fewer than the map resolution {resolution}"
        )));
    }
    let bin = |t: usize| t * resolution / n;
    let mut width = vec![0usize; resolution];
    for t in 0..n {
        width[bin(t)] += 1;
    }
    let scale = input.scale();
    let mut sums = vec![0.0f64; resolution * resolution];
    let mut scores = Vec::with_capacity(n);
    for r in 0..n {
        let q = input.q().row(r);
        scores.clear();
        scores.extend((0..input.key_limit(r)).map(|c| (dot(q, input.k().row(c)) * scale).widen()));
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = scores.iter().map(|&s| (s - max).exp()).sum();
        let row = &mut sums[bin(r) * resolution..(bin(r) + 1) * resolution];
        for (c, &s) in scores.iter().enumerate() {
            row[bin(c)] += (s - max).exp() / norm;
        }
    }
    for i in 0..resolution {
        let row = &mut sums[i * resolution..(i + 1) * resolution];
        for (j, x) in row.iter_mut().enumerate() {
            *x /= (width[i] * width[j]) as f64;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    #[test]
    fn uniform_head_rows_uniform_over_reachable_bins() {
        let z = Matrix::<f32>::zeros(64, 4);
        let input = AttentionInput::new(z.clone(), z.clone(), z, true).unwrap();
        let recs = record_calibration(&[(0, 0, &input)], 8).unwrap();
        let rec = &recs[0];
        for i in 0..8 {
            let row = rec.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // Off-diagonal reachable bins share one value; the diagonal bin is half-filled.
            for j in 1..i {
                assert!((row[j] - row[0]).abs() < 1e-12);
            }
            for j in i + 1..8 {
                assert_eq!(row[j], 0.0);
            }
        }
    }

    #[test]
    fn too_short_input() {
        let z = Matrix::<f32>::zeros(10, 2);
        let input = AttentionInput::new(z.clone(), z.clone(), z, true).unwrap();
        assert!(matches!(record_calibration(&[(0, 0, &input)], 16), Err(Error::InvalidInput(_))));
    }
}
