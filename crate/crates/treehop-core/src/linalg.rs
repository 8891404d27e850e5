//! Small dense kernels used by the store and the model.
//!
//! Everything here is written as plain sequential loops with a fixed
//! accumulation order, so results are reproducible bit for bit across runs
//! and across call sites. Do not "optimize" these into reassociated or
//! fused forms; several tests pin exact float equality between paths that
//! share these kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inner product with left-to-right accumulation.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// Inner products of one record against several queries in a single pass.
///
/// `out[j]` accumulates `record . queries[j]` in the same left-to-right
/// order as [`dot`], so each entry is bitwise identical to a separate
/// `dot(record, queries[j])` call. Batching only interleaves the independent
/// accumulator chains, which is what makes multi-branch store scans cheap.
pub fn dot_many<F: Scalar>(record: &[F], queries: &[&[F]], out: &mut [F]) {
    debug_assert_eq!(queries.len(), out.len());
    for acc in out.iter_mut() {
        *acc = F::zero();
    }
    for (i, r) in record.iter().enumerate() {
        for (j, q) in queries.iter().enumerate() {
            out[j] = out[j] + *r * q[i];
        }
    }
}

pub fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

pub fn add_assign<F: Scalar>(a: &mut [F], b: &[F]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x = *x + *y;
    }
}

pub fn scale_assign<F: Scalar>(a: &mut [F], s: F) {
    for x in a.iter_mut() {
        *x = *x * s;
    }
}

/// Numerically stable softmax (inputs shifted by their maximum).
pub fn softmax<F: Scalar>(z: &[F]) -> Vec<F> {
    let mut m = z[0];
    for &v in &z[1..] {
        if v > m {
            m = v;
        }
    }
    let mut out: Vec<F> = z.iter().map(|&v| (v - m).exp()).collect();
    let mut sum = F::zero();
    for &e in &out {
        sum = sum + e;
    }
    for e in out.iter_mut() {
        *e = *e / sum;
    }
    out
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = F::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn at(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// y = M x
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// y = M^T x
    pub fn matvec_t(&self, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![F::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (j, m) in self.row(i).iter().enumerate() {
                out[j] = out[j] + *m * xi;
            }
        }
        out
    }

    /// M[i][j] = u[i] * v[j]
    pub fn set_outer(&mut self, u: &[F], v: &[F]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            let ui = u[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = ui * v[j];
            }
        }
    }
}
