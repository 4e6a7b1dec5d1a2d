//! Binary (P5) PGM images for masks and similarity heatmaps.

use std::fs;
use std::path::Path;

use crate::attention::BlockMask;
use crate::error::{Error, Result};

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} pixels for {width}x{height}", pixels.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// One pixel per block: computed blocks white, skipped blocks black.
pub fn mask_to_pgm(mask: &BlockMask) -> Vec<u8> {
    let n = mask.n_blocks();
    let pixels: Vec<u8> = mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_pgm(n, n, &pixels).expect("square mask")
}

/// Square matrix with values in `[0, 1]` as a grayscale image (1 = white).
pub fn heatmap_to_pgm(values: &[Vec<f64>]) -> Result<Vec<u8>> {
    let n = values.len();
    let mut pixels = Vec::with_capacity(n * n);
    for row in values {
        if row.len() != n {
            return Err(Error::ShapeMismatch("heatmap is not square".into()));
        }
        pixels.extend(row.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    encode_pgm(n, n, &pixels)
}

pub fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}
