//! Synthetic multi-head attention model with ground-truth head clusters.
//!
//! Every structured head belongs to one template. A template fixes how query
//! and key features depend on position (sink tokens, a local band, a fixed
//! slash offset, a staircase of segments, or a set of vertical key columns),
//! so heads sharing a template attend alike; per-head Gaussian noise and
//! random values make them differ in detail. Unstructured heads draw Q and K
//! at random and have no template.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attention::AttentionInput;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Template {
    /// The first `tokens` keys absorb almost all attention.
    Sink { tokens: usize },
    /// Attention concentrated within roughly `width` tokens behind the query.
    LocalBand { width: usize },
    /// Attention peaked `offset` tokens behind the query.
    Slash { offset: usize, width: usize },
    /// Queries attend within their own segment; segment lengths are drawn
    /// from `[min_segment, max_segment]`.
    Staircase { min_segment: usize, max_segment: usize },
    /// `count` key positions, spread over the sequence, attract every query.
    Vertical { count: usize },
    /// A smooth preference for distant keys over roughly `width` tokens.
    /// Low `contrast` makes the head close to uniform over blocks.
    Broad { width: usize, contrast: f64 },
}

impl Template {
    pub fn name(&self) -> &'static str {
        match self {
            Template::Sink { .. } => "sink",
            Template::LocalBand { .. } => "local_band",
            Template::Slash { .. } => "slash",
            Template::Staircase { .. } => "staircase",
            Template::Vertical { .. } => "vertical",
            Template::Broad { .. } => "broad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthStructure {
    pub templates: Vec<Template>,
    /// Heads with random Q/K and no template.
    pub unstructured_heads: usize,
    /// Per-head noise norm as a fraction of the template signal norm.
    pub noise: f64,
    /// Peak scaled logit `A²/√d_h` of a template match.
    pub sharpness: f64,
}

impl Default for SynthStructure {
    fn default() -> Self {
        Self {
            templates: vec![
                Template::Sink { tokens: 32 },
                Template::LocalBand { width: 48 },
                Template::Staircase { min_segment: 448, max_segment: 896 },
                Template::Slash { offset: 512, width: 48 },
                Template::Broad { width: 2048, contrast: 0.4 },
            ],
            unstructured_heads: 0,
            noise: 0.05,
            sharpness: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub num_layers: usize,
    pub num_heads: usize,
    pub head_dim: usize,
    pub n_tokens: usize,
    pub block_size: usize,
    /// Fixes templates and the head → template assignment.
    pub seed: u64,
    /// Fixes the per-head noise and values, i.e. the "input".
    pub input_seed: u64,
    pub structure: SynthStructure,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            num_layers: 4,
            num_heads: 8,
            head_dim: 64,
            n_tokens: 2048,
            block_size: crate::attention::DEFAULT_BLOCK_SIZE,
            seed: 0,
            input_seed: 1,
            structure: SynthStructure::default(),
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("head_dim", self.head_dim),
            ("n_tokens", self.n_tokens),
            ("block_size", self.block_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.n_tokens < self.block_size {
            return Err(Error::Config(format!(
                "n_tokens ({}) must be at least block_size ({})",
                self.n_tokens, self.block_size
            )));
        }
        if self.head_dim < 2 {
            return Err(Error::Config("head_dim must be at least 2".into()));
        }
        let s = &self.structure;
        if s.templates.is_empty() && s.unstructured_heads == 0 {
            return Err(Error::Config("synthetic structure has no templates".into()));
        }
        if s.unstructured_heads > self.total_heads() {
            return Err(Error::Config("more unstructured heads than heads".into()));
        }
        if !(s.noise >= 0.0 && s.noise.is_finite()) || !(s.sharpness > 0.0 && s.sharpness.is_finite()) {
            return Err(Error::Config("noise must be >= 0 and sharpness > 0".into()));
        }
        for t in &s.templates {
            let ok = match *t {
                Template::Sink { tokens } => tokens > 0,
                Template::LocalBand { width } | Template::Slash { width, .. } => width > 0,
                Template::Staircase { min_segment, max_segment } => 0 < min_segment && min_segment <= max_segment,
                Template::Vertical { count } => count > 0,
                Template::Broad { width, contrast } => width > 0 && contrast > 0.0 && contrast.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!("invalid {} template parameters: {t:?}", t.name())));
            }
        }
        Ok(())
    }

    pub fn total_heads(&self) -> usize {
        self.num_layers * self.num_heads
    }
}

/// Deterministic 64-bit mix for deriving sub-seeds.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Position-dependent feature generator for one template.
#[derive(Debug, Clone)]
enum Features {
    Sink { tokens: usize },
    Rotary { freqs: Vec<f64>, shift: usize, gain: f64, sign: f64 },
    Segments { bounds: Vec<usize>, dirs: Vec<Vec<f64>> },
    Columns { positions: Vec<usize> },
}

impl Features {
    fn build(template: &Template, d: usize, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let rotary = |width: usize, shift: usize, gain: f64, sign: f64, rng: &mut ChaCha8Rng| {
            let w_max = PI / width.max(1) as f64;
            let freqs = (0..d / 2).map(|_| rng.random_range(0.05..1.0) * w_max).collect();
            Features::Rotary { freqs, shift, gain, sign }
        };
        match *template {
            Template::Sink { tokens } => Features::Sink { tokens: tokens.max(1) },
            Template::LocalBand { width } => rotary(width, 0, 1.0, 1.0, rng),
            Template::Slash { offset, width } => rotary(width, offset, 1.0, 1.0, rng),
            Template::Broad { width, contrast } => rotary(width, 0, contrast, -1.0, rng),
            Template::Staircase { min_segment, max_segment } => {
                let (lo, hi) = (min_segment.max(1), max_segment.max(min_segment.max(1)));
                let mut bounds = vec![0];
                while *bounds.last().expect("nonempty") < n {
                    let len = rng.random_range(lo..=hi);
                    bounds.push(bounds.last().expect("nonempty") + len);
                }
                let dirs = (0..bounds.len())
                    .map(|_| {
                        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        v.into_iter().map(|x| x / norm).collect()
                    })
                    .collect();
                Features::Segments { bounds, dirs }
            }
            Template::Vertical { count } => {
                let mut positions: Vec<usize> =
                    (0..count.max(1)).map(|_| (rng.random::<f64>() * n as f64) as usize).collect();
                positions.sort_unstable();
                positions.dedup();
                Features::Columns { positions }
            }
        }
    }

    /// Unit-scale query and key features at position `t` (norm ≤ 1).
    fn query(&self, t: usize, d: usize, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            Features::Sink { .. } | Features::Columns { .. } => out[0] = 1.0,
            Features::Rotary { freqs, shift, gain, sign } => {
                let pos = t as f64 - *shift as f64;
                Self::rotary(freqs, pos, sign * gain.sqrt(), out);
            }
            Features::Segments { bounds, dirs } => {
                let s = bounds.partition_point(|&b| b <= t) - 1;
                out[..d].copy_from_slice(&dirs[s]);
            }
        }
    }

    fn key(&self, t: usize, d: usize, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            Features::Sink { tokens } => {
                if t < *tokens {
                    out[0] = 1.0;
                }
            }
            Features::Columns { positions } => {
                if positions.binary_search(&t).is_ok() {
                    out[0] = 1.0;
                }
            }
            Features::Rotary { freqs, gain, .. } => Self::rotary(freqs, t as f64, gain.sqrt(), out),
            Features::Segments { .. } => self.query(t, d, out),
        }
    }

    fn rotary(freqs: &[f64], pos: f64, gain: f64, out: &mut [f64]) {
        let amp = gain / (freqs.len() as f64).sqrt();
        for (f, &w) in freqs.iter().enumerate() {
            out[2 * f] = amp * (w * pos).cos();
            out[2 * f + 1] = amp * (w * pos).sin();
        }
    }
}

/// The generated model: templates, assignment, and per-head tensors on demand.
#[derive(Debug, Clone)]
pub struct SynthModel {
    spec: ModelSpec,
    assignment: Vec<Option<usize>>,
    features: Vec<Features>,
}

impl SynthModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let total = spec.total_heads();
        let s = &spec.structure;
        let mut assignment: Vec<Option<usize>> = (0..total - s.unstructured_heads)
            .map(|i| if s.templates.is_empty() { None } else { Some(i % s.templates.len()) })
            .collect();
        assignment.extend(std::iter::repeat_n(None, s.unstructured_heads));
        assignment.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(spec.seed, 1, 0)));

        let features = s
            .templates
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, 2, i as u64));
                Features::build(t, spec.head_dim, spec.n_tokens, &mut rng)
            })
            .collect();
        Ok(Self { spec, assignment, features })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Template index of a head; `None` for unstructured heads.
    pub fn template_of(&self, layer: usize, head: usize) -> Option<usize> {
        self.assignment[layer * self.spec.num_heads + head]
    }

    /// Segment start positions of a staircase template, beginning with 0 and
    /// ending at or past `n_tokens`.
    pub fn segment_bounds(&self, template: usize) -> Option<&[usize]> {
        match self.features.get(template)? {
            Features::Segments { bounds, .. } => Some(bounds),
            _ => None,
        }
    }

    /// Ground-truth labels in (layer, head) order; unstructured heads share
    /// the label `templates.len()`.
    pub fn ground_truth(&self) -> Vec<usize> {
        let k = self.spec.structure.templates.len();
        self.assignment.iter().map(|t| t.unwrap_or(k)).collect()
    }

    pub fn heads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let h = self.spec.num_heads;
        (0..self.spec.num_layers).flat_map(move |l| (0..h).map(move |hh| (l, hh)))
    }

    pub fn head_input(&self, layer: usize, head: usize) -> AttentionInput<f32> {
        let spec = &self.spec;
        let (n, d) = (spec.n_tokens, spec.head_dim);
        let s = &spec.structure;
        let amp = (s.sharpness * (d as f64).sqrt()).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.input_seed, 3, (layer * spec.num_heads + head) as u64));
        let noise_sd = s.noise * amp / (d as f64).sqrt();

        let mut q = Matrix::<f32>::zeros(n, d);
        let mut k = Matrix::<f32>::zeros(n, d);
        let mut fq = vec![0.0f64; d];
        let mut fk = vec![0.0f64; d];
        let template = self.template_of(layer, head);
        for t in 0..n {
            match template {
                Some(i) => {
                    self.features[i].query(t, d, &mut fq);
                    self.features[i].key(t, d, &mut fk);
                }
                None => {
                    let unit = (d as f64).powf(-0.25);
                    fq.iter_mut().for_each(|x| *x = unit * gauss(&mut rng));
                    fk.iter_mut().for_each(|x| *x = unit * gauss(&mut rng));
                }
            }
            for c in 0..d {
                let nq: f64 = StandardNormal.sample(&mut rng);
                let nk: f64 = StandardNormal.sample(&mut rng);
                q.set(t, c, (amp * fq[c] + noise_sd * nq) as f32);
                k.set(t, c, (amp * fk[c] + noise_sd * nk) as f32);
            }
        }
        let v = Matrix::from_fn(n, d, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x as f32
        });
        AttentionInput::new(q, k, v, true).expect("generated tensors are well-formed")
    }
}

/// One generated head.
#[derive(Debug, Clone)]
pub struct SynthHead {
    pub layer: usize,
    pub head: usize,
    pub template: Option<usize>,
    pub input: AttentionInput<f32>,
}

/// Materializes every head of the model in (layer, head) order.
pub fn synth_model_generate(spec: &ModelSpec) -> Result<Vec<SynthHead>> {
    let model = SynthModel::new(spec.clone())?;
    Ok(model
        .heads()
        .map(|(layer, head)| SynthHead {
            layer,
            head,
            template: model.template_of(layer, head),
            input: model.head_input(layer, head),
        })
        .collect())
}

fn gauss(rng: &mut impl rand::Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ModelSpec {
        ModelSpec { num_layers: 2, num_heads: 4, n_tokens: 256, head_dim: 16, ..ModelSpec::default() }
    }

    #[test]
    fn deterministic() {
        let a = synth_model_generate(&small_spec()).unwrap();
        let b = synth_model_generate(&small_spec()).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.input, y.input);
            assert_eq!(x.template, y.template);
        }
        let other = ModelSpec { input_seed: 99, ..small_spec() };
        let c = synth_model_generate(&other).unwrap();
        assert_ne!(a[0].input, c[0].input);
        assert_eq!(a[0].template, c[0].template);
    }

    #[test]
    fn balanced_assignment_with_unstructured() {
        let mut spec = small_spec();
        spec.structure.unstructured_heads = 2;
        let model = SynthModel::new(spec).unwrap();
        let truth = model.ground_truth();
        let k = model.spec().structure.templates.len();
        assert_eq!(truth.iter().filter(|&&t| t == k).count(), 2);
        for t in 0..k {
            let c = truth.iter().filter(|&&x| x == t).count();
            assert!((1..=2).contains(&c));
        }
    }

    #[test]
    fn validation() {
        let mut spec = small_spec();
        spec.n_tokens = 32;
        assert!(SynthModel::new(spec).is_err());
        let mut spec = small_spec();
        spec.structure.noise = -1.0;
        assert!(SynthModel::new(spec).is_err());
        let mut spec = small_spec();
        spec.structure.templates = vec![Template::Staircase { min_segment: 9, max_segment: 3 }];
        assert!(SynthModel::new(spec).is_err());
    }
}
