use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σp = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// A discrete distribution over key blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("distribution has a negative or non-finite entry".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!("distribution sums to {sum}, not 1")));
        }
        Ok(Self(p))
    }

    /// Divides by the total; errors on zero mass.
    pub fn normalized(mut p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("distribution has a negative or non-finite entry".into()));
        }
        let sum: f64 = p.iter().sum();
        if sum <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        p.iter_mut().for_each(|x| *x /= sum);
        Self::new(p)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero cells");
        Self(vec![1.0 / n as f64; n])
    }

    /// Numerically stable softmax of finite logits.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidInput("softmax over no finite logits".into()));
        }
        let exp: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
        Self::normalized(exp)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}
