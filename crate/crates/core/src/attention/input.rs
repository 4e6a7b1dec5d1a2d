use crate::error::{Error, Result};
use crate::tensor::{Matrix, Real};

/// Per-head attention operands; Q, K and V are all `N × d_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInput<T> {
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    causal: bool,
}

impl<T: Real> AttentionInput<T> {
    pub fn new(q: Matrix<T>, k: Matrix<T>, v: Matrix<T>, causal: bool) -> Result<Self> {
        let shape = (q.rows(), q.cols());
        if (k.rows(), k.cols()) != shape || (v.rows(), v.cols()) != shape {
            return Err(Error::InvalidInput(format!(
                "Q is {}x{}, K is {}x{}, V is {}x{}",
                q.rows(),
                q.cols(),
                k.rows(),
                k.cols(),
                v.rows(),
                v.cols()
            )));
        }
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidInput("N and d_h must be at least 1".into()));
        }
        let finite = |m: &Matrix<T>| m.as_slice().iter().all(|x| x.is_finite());
        if !(finite(&q) && finite(&k) && finite(&v)) {
            return Err(Error::InvalidInput("non-finite entry in Q, K or V".into()));
        }
        Ok(Self { q, k, v, causal })
    }

    #[inline]
    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    #[inline]
    pub fn k(&self) -> &Matrix<T> {
        &self.k
    }

    #[inline]
    pub fn v(&self) -> &Matrix<T> {
        &self.v
    }

    #[inline]
    pub fn causal(&self) -> bool {
        self.causal
    }

    /// Token count N.
    #[inline]
    pub fn len(&self) -> usize {
        self.q.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q.rows() == 0
    }

    /// Head dimension d_h.
    #[inline]
    pub fn head_dim(&self) -> usize {
        self.q.cols()
    }

    /// `1/√d_h`, rounded once into the element type.
    #[inline]
    pub fn scale(&self) -> T {
        T::narrow(1.0 / (self.head_dim() as f64).sqrt())
    }

    /// Exclusive upper bound of key positions visible from query `row`.
    #[inline]
    pub fn key_limit(&self, row: usize) -> usize {
        if self.causal {
            row + 1
        } else {
            self.len()
        }
    }

    pub fn cast<U: Real>(&self) -> AttentionInput<U> {
        AttentionInput { q: self.q.cast(), k: self.k.cast(), v: self.v.cast(), causal: self.causal }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_shapes() {
        let q = Matrix::<f32>::zeros(4, 2);
        let k = Matrix::<f32>::zeros(4, 3);
        let v = Matrix::<f32>::zeros(4, 2);
        assert!(matches!(AttentionInput::new(q, k, v, true), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let mut q = Matrix::<f32>::zeros(2, 2);
        q.set(1, 1, f32::NAN);
        let z = Matrix::<f32>::zeros(2, 2);
        assert!(AttentionInput::new(q, z.clone(), z, false).is_err());
    }

    #[test]
    fn rejects_empty() {
        let z = Matrix::<f64>::zeros(0, 4);
        assert!(AttentionInput::new(z.clone(), z.clone(), z, true).is_err());
    }
}
