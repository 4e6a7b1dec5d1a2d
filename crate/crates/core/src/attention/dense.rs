use rayon::prelude::*;

use crate::attention::{AttentionInput, BlockMask};
use crate::error::{Error, Result};
use crate::tensor::{dot, Matrix, Real};

/// Penalty subtracted from the scaled score of every token pair whose block bit is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskPenalty {
    /// Subtract a finite constant `c`.
    Finite(f64),
    /// Hard exclusion (`c = ∞`): masked pairs get exactly zero weight.
    Infinite,
}

/// Full softmax attention. Causal rows only see positions up to their own index.
pub fn dense_attention<T: Real>(input: &AttentionInput<T>) -> Result<Matrix<T>> {
    attend(input, |_, _| Some(0.0))
}

/// Dense attention with `c·(1−M)` subtracted from the scaled scores, where the
/// block mask is expanded token-wise.
pub fn masked_dense_attention<T: Real>(
    input: &AttentionInput<T>,
    mask: &BlockMask,
    penalty: MaskPenalty,
) -> Result<Matrix<T>> {
    let geometry = mask.geometry();
    if geometry.n_tokens != input.len() {
        return Err(Error::ShapeMismatch(format!(
            "mask covers {} tokens, input has {}",
            geometry.n_tokens,
            input.len()
        )));
    }
    let bs = geometry.block_size;
    match penalty {
        MaskPenalty::Finite(c) if !(c > 0.0 && c.is_finite()) => {
            Err(Error::InvalidInput(format!("penalty constant must be positive, got {c}")))
        }
        MaskPenalty::Finite(c) => {
            attend(input, |r, col| Some(if mask.get(r / bs, col / bs) { 0.0 } else { c }))
        }
        MaskPenalty::Infinite => attend(input, |r, col| mask.get(r / bs, col / bs).then_some(0.0)),
    }
    .map_err(|e| match e {
        Error::DegenerateMask { row_block } => Error::DegenerateMask { row_block: row_block / bs },
        other => other,
    })
}

/// Row-by-row softmax attention. `penalty(r, c)` returns the amount subtracted
/// from the scaled score, or `None` to exclude the pair entirely. A row with no
/// admissible key reports `DegenerateMask` carrying the *row index*.
fn attend<T, F>(input: &AttentionInput<T>, penalty: F) -> Result<Matrix<T>>
where
    T: Real,
    F: Fn(usize, usize) -> Option<f64> + Sync,
{
    let n = input.len();
    let d = input.head_dim();
    let scale = input.scale();
    let mut out = Matrix::<T>::zeros(n, d);
    out.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(r, out_row)| {
            let q = input.q().row(r);
            let limit = input.key_limit(r);
            let mut scores: Vec<(usize, f64)> = Vec::with_capacity(limit);
            for c in 0..limit {
                if let Some(p) = penalty(r, c) {
                    let s = (dot(q, input.k().row(c)) * scale).widen();
                    scores.push((c, s - p));
                }
            }
            if scores.is_empty() {
                return Err(Error::DegenerateMask { row_block: r });
            }
            let max = scores.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
            let mut acc = vec![0.0f64; d];
            let mut norm = 0.0f64;
            for &(c, s) in &scores {
                let w = (s - max).exp();
                norm += w;
                for (a, &x) in acc.iter_mut().zip(input.v().row(c)) {
                    *a += w * x.widen();
                }
            }
            for (o, a) in out_row.iter_mut().zip(&acc) {
                *o = T::narrow(a / norm);
            }
            Ok(())
        })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::BlockGeometry;

    fn input_1token() -> AttentionInput<f64> {
        let q = Matrix::from_vec(1, 2, vec![3.0, -1.0]).unwrap();
        let k = Matrix::from_vec(1, 2, vec![0.5, 2.0]).unwrap();
        let v = Matrix::from_vec(1, 2, vec![7.0, -4.0]).unwrap();
        AttentionInput::new(q, k, v, true).unwrap()
    }

    #[test]
    fn single_token_returns_value() {
        let out = dense_attention(&input_1token()).unwrap();
        assert_eq!(out.row(0), &[7.0, -4.0]);
    }

    #[test]
    fn identical_keys_give_uniform_weights() {
        let n = 5;
        let q = Matrix::from_fn(n, 3, |r, c| (r * 3 + c) as f64 * 0.1);
        let k = Matrix::from_fn(n, 3, |_, c| c as f64 - 1.0);
        let v = Matrix::from_fn(n, 3, |r, c| (r as f64) - (c as f64) * 0.5);
        let input = AttentionInput::new(q, k, v.clone(), false).unwrap();
        let out = dense_attention(&input).unwrap();
        for c in 0..3 {
            let mean: f64 = (0..n).map(|r| v.get(r, c)).sum::<f64>() / n as f64;
            for r in 0..n {
                assert!((out.get(r, c) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_ones_mask_matches_dense_exactly() {
        let n = 40;
        let q = Matrix::from_fn(n, 4, |r, c| ((r * 7 + c * 3) % 11) as f32 * 0.2 - 1.0);
        let k = Matrix::from_fn(n, 4, |r, c| ((r * 5 + c) % 13) as f32 * 0.15 - 0.9);
        let v = Matrix::from_fn(n, 4, |r, c| ((r + c * 17) % 7) as f32);
        let input = AttentionInput::new(q, k, v, true).unwrap();
        let g = BlockGeometry::new(n, 16).unwrap();
        let dense = dense_attention(&input).unwrap();
        for penalty in [MaskPenalty::Finite(1e4), MaskPenalty::Infinite] {
            let masked = masked_dense_attention(&input, &BlockMask::full(g), penalty).unwrap();
            assert_eq!(dense, masked);
        }
    }

    #[test]
    fn diagonal_mask_attends_within_block() {
        let n = 12;
        let bs = 4;
        let q = Matrix::from_fn(n, 2, |r, c| (r as f64 * 0.3 + c as f64).sin());
        let k = Matrix::from_fn(n, 2, |r, c| (r as f64 * 0.7 - c as f64).cos());
        let v = Matrix::from_fn(n, 2, |r, c| r as f64 * 10.0 + c as f64);
        let input = AttentionInput::new(q, k, v, true).unwrap();
        let g = BlockGeometry::new(n, bs).unwrap();
        let mask = BlockMask::from_fn(g, |i, j| i == j);
        let out = masked_dense_attention(&input, &mask, MaskPenalty::Infinite).unwrap();
        // Each output is a convex combination of V rows inside the query's block.
        for r in 0..n {
            let lo = (r / bs * bs) as f64 * 10.0;
            let hi = r as f64 * 10.0;
            assert!(out.get(r, 0) >= lo - 1e-9 && out.get(r, 0) <= hi + 1e-9, "row {r}");
        }
    }

    #[test]
    fn empty_row_is_degenerate() {
        let input = input_1token();
        let g = BlockGeometry::new(1, 4).unwrap();
        let err = masked_dense_attention(&input, &BlockMask::empty(g), MaskPenalty::Infinite);
        assert!(matches!(err, Err(Error::DegenerateMask { row_block: 0 })));
        // A finite penalty never empties a row.
        assert!(masked_dense_attention(&input, &BlockMask::empty(g), MaskPenalty::Finite(5.0)).is_ok());
    }

    #[test]
    fn rejects_bad_penalty_and_shape() {
        let input = input_1token();
        let g = BlockGeometry::new(1, 4).unwrap();
        assert!(masked_dense_attention(&input, &BlockMask::full(g), MaskPenalty::Finite(0.0)).is_err());
        let g2 = BlockGeometry::new(2, 4).unwrap();
        assert!(matches!(
            masked_dense_attention(&input, &BlockMask::full(g2), MaskPenalty::Infinite),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
