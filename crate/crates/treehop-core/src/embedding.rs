use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// A dense embedding vector. Construction rejects empty and non-finite
/// input, so downstream kernels never have to re-check.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<F: Scalar> {
    values: Vec<F>,
}

impl<F: Scalar> Embedding<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Embedding { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Embedding::new(values.iter().map(|&v| F::of_f64(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<F> {
        self.values
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_f64()).collect()
    }

    pub fn norm(&self) -> F {
        linalg::norm(&self.values)
    }

    /// Unit-norm copy. A zero vector has no direction and is rejected.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == F::zero() {
            return Err(Error::ZeroNorm);
        }
        Ok(Embedding { values: self.values.iter().map(|&v| v / n).collect() })
    }

    pub fn convert<G: Scalar>(&self) -> Embedding<G> {
        Embedding { values: self.values.iter().map(|v| G::of_f64(v.as_f64())).collect() }
    }
}
