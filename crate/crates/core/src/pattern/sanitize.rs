use crate::attention::BlockMask;

/// Forces the diagonal and first-column blocks on and clears everything above
/// the diagonal, so every query block has at least one computed key block.
pub fn sanitize_mask(mask: &BlockMask) -> BlockMask {
    let mut out = mask.clone();
    let n = out.n_blocks();
    for i in 0..n {
        out.set(i, i, true);
        out.set(i, 0, true);
        for j in i + 1..n {
            out.set(i, j, false);
        }
    }
    out
}
