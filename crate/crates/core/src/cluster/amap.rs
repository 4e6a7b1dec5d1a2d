//! AMAP calibration-map container.
//!
//! Layout: 8-byte magic `AMAPv001`, little-endian `u32` layers, heads and
//! resolution R, then `layers·heads` row-major `R × R` maps of little-endian
//! `f32`, ordered by (layer, head).

use std::fs;
use std::path::Path;

use crate::cluster::AttentionMapRecord;
use crate::error::{Error, Result};

pub const AMAP_MAGIC: &[u8; 8] = b"AMAPv001";
const HEADER_LEN: usize = 8 + 3 * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AmapFile {
    pub layers: usize,
    pub heads: usize,
    pub resolution: usize,
    pub maps: Vec<f32>,
}

impl AmapFile {
    /// Records must cover every (layer, head) exactly once with one resolution.
    pub fn from_records(records: &[AttentionMapRecord]) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::InvalidInput("no records".into()))?;
        let resolution = first.resolution;
        let layers = records.iter().map(|r| r.layer).max().unwrap_or(0) + 1;
        let heads = records.iter().map(|r| r.head).max().unwrap_or(0) + 1;
        if records.len() != layers * heads {
            return Err(Error::InvalidInput(format!(
                "{} records do not tile {layers} layers x {heads} heads",
                records.len()
            )));
        }
        let cell = resolution * resolution;
        let mut maps = vec![0.0f32; layers * heads * cell];
        let mut seen = vec![false; layers * heads];
        for r in records {
            if r.resolution != resolution {
                return Err(Error::ShapeMismatch("records differ in resolution".into()));
            }
            let slot = r.layer * heads + r.head;
            if std::mem::replace(&mut seen[slot], true) {
                return Err(Error::InvalidInput(format!("duplicate record ({}, {})", r.layer, r.head)));
            }
            for (dst, &src) in maps[slot * cell..(slot + 1) * cell].iter_mut().zip(&r.map) {
                *dst = src as f32;
            }
        }
        Ok(Self { layers, heads, resolution, maps })
    }

    pub fn to_records(&self) -> Vec<AttentionMapRecord> {
        let cell = self.resolution * self.resolution;
        (0..self.layers * self.heads)
            .map(|slot| AttentionMapRecord {
                layer: slot / self.heads,
                head: slot % self.heads,
                resolution: self.resolution,
                map: self.maps[slot * cell..(slot + 1) * cell].iter().map(|&x| x as f64).collect(),
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.maps.len());
        out.extend_from_slice(AMAP_MAGIC);
        for v in [self.layers, self.heads, self.resolution] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for x in &self.maps {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Malformed("AMAP file shorter than its header".into()));
        }
        if &bytes[..8] != AMAP_MAGIC {
            return Err(Error::Malformed("bad AMAP magic".into()));
        }
        let field = |i: usize| {
            let at = 8 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
        };
        let (layers, heads, resolution) = (field(0), field(1), field(2));
        let count = layers
            .checked_mul(heads)
            .and_then(|x| x.checked_mul(resolution))
            .and_then(|x| x.checked_mul(resolution))
            .ok_or_else(|| Error::Malformed("AMAP dimensions overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != count * 4 {
            return Err(Error::Malformed(format!(
                "AMAP body has {} bytes, header implies {}",
                body.len(),
                count * 4
            )));
        }
        let maps = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { layers, heads, resolution, maps })
    }
}

pub fn write_amap(file: &AmapFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, file.to_bytes())?;
    Ok(())
}

pub fn read_amap(path: impl AsRef<Path>) -> Result<AmapFile> {
    AmapFile::from_bytes(&fs::read(path)?)
}
