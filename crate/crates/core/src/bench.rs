//! Wall-clock comparison of dense attention against the block-sparse kernel:
//! warm-up runs, then the mean of timed repetitions, per sequence length.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{dense_attention, sparse_attention, AttentionInput, BlockGeometry, BlockMask};
use crate::error::{Error, Result};
use crate::pattern::{sanitize_mask, search_vertical_slash};
use crate::pipeline::{ModelSpec, SynthModel, SynthStructure, Template};
use crate::tensor::Real;

pub const BENCH_VERSION: u32 = 1;

/// Lengths above this need `allow_large`.
pub const DESK_SCALE_LIMIT: usize = 32 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchMask {
    /// Vertical-slash search on the head at this γ.
    VerticalSlash { gamma: f64 },
    /// Random blocks at roughly this causal density, then sanitized.
    Random { density: f64 },
    /// All causal blocks.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub warmup: usize,
    pub repetitions: usize,
    pub block_size: usize,
    pub head_dim: usize,
    pub seed: u64,
    pub template: Template,
    pub mask: BenchMask,
    pub allow_large: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1024, 2048, 4096, 8192],
            warmup: 1,
            repetitions: 10,
            block_size: crate::attention::DEFAULT_BLOCK_SIZE,
            head_dim: 64,
            seed: 0,
            template: Template::LocalBand { width: 48 },
            mask: BenchMask::VerticalSlash { gamma: 0.9 },
            allow_large: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.iter().any(|&n| n < self.block_size) {
            return Err(Error::Config("bench lengths must be non-empty and >= block_size".into()));
        }
        if self.repetitions == 0 || self.block_size == 0 || self.head_dim < 2 {
            return Err(Error::Config("repetitions, block_size and head_dim must be positive".into()));
        }
        if let Some(&n) = self.lengths.iter().find(|&&n| n > DESK_SCALE_LIMIT) {
            if !self.allow_large {
                return Err(Error::Config(format!(
                    "length {n} exceeds the desk-scale limit {DESK_SCALE_LIMIT}; set allow_large to opt in"
                )));
            }
        }
        match self.mask {
            BenchMask::VerticalSlash { gamma } if !(gamma > 0.0 && gamma <= 1.0) => {
                Err(Error::Config(format!("bench gamma must be in (0, 1], got {gamma}")))
            }
            BenchMask::Random { density } if !(density > 0.0 && density <= 1.0) => {
                Err(Error::Config(format!("bench density must be in (0, 1], got {density}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_tokens: usize,
    pub dense_ms: f64,
    pub sparse_ms: f64,
    pub speedup: f64,
    pub density: f64,
    pub computed_blocks: usize,
    pub mask_blocks: usize,
    /// Time to build the mask, reported separately from the kernel.
    pub pattern_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub cpu: String,
    pub threads: usize,
    pub precision: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|s| s.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Self {
            cpu,
            threads: rayon::current_num_threads(),
            precision: f32::NAME.into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u32,
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub environment: Environment,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("n_tokens,dense_ms,sparse_ms,speedup,density,computed_blocks,mask_blocks,pattern_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.6},{},{},{:.4}\n",
                r.n_tokens, r.dense_ms, r.sparse_ms, r.speedup, r.density, r.computed_blocks, r.mask_blocks, r.pattern_ms
            ));
        }
        out
    }
}

/// Mean wall-clock milliseconds of `reps` calls after `warmup` untimed calls.
pub fn time_mean_ms<T>(warmup: usize, reps: usize, mut f: impl FnMut() -> T) -> f64 {
    for _ in 0..warmup {
        std::hint::black_box(f());
    }
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(f());
    }
    start.elapsed().as_secs_f64() * 1e3 / reps.max(1) as f64
}

/// Random causal mask with about `density` of the causal blocks set, sanitized.
pub fn random_mask(geometry: BlockGeometry, density: f64, seed: u64) -> BlockMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = BlockMask::from_fn(geometry, |i, j| j <= i && rng.random::<f64>() < density);
    sanitize_mask(&mask)
}

/// One synthetic head of the configured template at length `n`.
pub fn bench_head(config: &BenchConfig, n: usize) -> Result<AttentionInput<f32>> {
    let spec = ModelSpec {
        num_layers: 1,
        num_heads: 1,
        head_dim: config.head_dim,
        n_tokens: n,
        block_size: config.block_size,
        seed: config.seed,
        input_seed: config.seed.wrapping_add(1),
        structure: SynthStructure { templates: vec![config.template.clone()], ..SynthStructure::default() },
    };
    Ok(SynthModel::new(spec)?.head_input(0, 0))
}

pub fn bench_mask(config: &BenchConfig, input: &AttentionInput<f32>) -> Result<BlockMask> {
    let geometry = BlockGeometry::new(input.len(), config.block_size)?;
    Ok(match config.mask {
        BenchMask::VerticalSlash { gamma } => search_vertical_slash(input, gamma, config.block_size)?,
        BenchMask::Random { density } => random_mask(geometry, density, config.seed),
        BenchMask::Full => BlockMask::full_causal(geometry),
    })
}

pub fn bench_length(config: &BenchConfig, n: usize) -> Result<BenchRow> {
    let input = bench_head(config, n)?;
    let t = Instant::now();
    let mask = bench_mask(config, &input)?;
    let pattern_ms = t.elapsed().as_secs_f64() * 1e3;

    let probe = sparse_attention(&input, &mask)?;
    let dense_ms = time_mean_ms(config.warmup, config.repetitions, || dense_attention(&input));
    let sparse_ms = time_mean_ms(config.warmup, config.repetitions, || sparse_attention(&input, &mask));
    log::info!("N={n}: dense {dense_ms:.2} ms, sparse {sparse_ms:.2} ms, density {:.3}", probe.density());
    Ok(BenchRow {
        n_tokens: n,
        dense_ms,
        sparse_ms,
        speedup: dense_ms / sparse_ms,
        density: probe.density(),
        computed_blocks: probe.computed_blocks,
        mask_blocks: mask.causal_popcount(),
        pattern_ms,
    })
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let mut lengths = config.lengths.clone();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.iter().any(|&n| n > DESK_SCALE_LIMIT) {
        log::warn!("lengths above {DESK_SCALE_LIMIT} tokens need several GB of memory per head");
    }
    let rows = lengths.iter().map(|&n| bench_length(config, n)).collect::<Result<Vec<_>>>()?;
    Ok(BenchReport { version: BENCH_VERSION, config: config.clone(), rows, environment: Environment::detect() })
}
