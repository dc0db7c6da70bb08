//! Links as `K × K` matrices over per-observation feature vectors.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::ustat::chain::LinkSystem;

/// Observation features `e_i` (rows of an `n × K` matrix) with a fixed `H`.
/// A link `G` has entries `κ(i, j) = e_iᵀ G e_j`.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    features: Matrix,
    h: Matrix,
}

impl DenseSystem {
    pub fn new(features: Matrix, h: Matrix) -> Result<Self> {
        let k = features.cols();
        if h.rows() != k || h.cols() != k {
            return Err(Error::ShapeMismatch("H must be K × K"));
        }
        Ok(Self { features, h })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// `Σ_i x_i e_i e_iᵀ`.
    fn weighted_gram(&self, x: &[f64]) -> Matrix {
        let k = self.dim();
        let mut m = Matrix::zeros(k, k);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                m.add_outer(xi, self.features.row(i));
            }
        }
        m
    }

    /// `Eᵀ x`.
    fn pull(&self, x: &[f64]) -> Vec<f64> {
        let k = self.dim();
        let mut out = alloc::vec![0.0; k];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &e) in out.iter_mut().zip(self.features.row(i)) {
                *o += xi * e;
            }
        }
        out
    }

    fn push(&self, c: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| dot(self.features.row(i), c)).collect()
    }

    /// Full `n × n` matrix of link values.
    pub fn kernel_matrix(&self, link: &Matrix) -> Matrix {
        let eg = self.features.matmul(link);
        eg.matmul(&self.features.transpose())
    }
}

impl LinkSystem for DenseSystem {
    type Link = Matrix;

    fn len(&self) -> usize {
        self.features.rows()
    }

    fn entry(&self, link: &Matrix, i: usize, j: usize) -> f64 {
        link.bilinear(self.features.row(i), self.features.row(j))
    }

    fn compose(&self, a: &Matrix, b: &Matrix) -> Matrix {
        a.matmul(&self.h).matmul(b)
    }

    fn diag(&self, link: &Matrix) -> Vec<f64> {
        let eg = self.features.matmul(link);
        (0..self.len())
            .map(|i| dot(eg.row(i), self.features.row(i)))
            .collect()
    }

    fn apply(&self, link: &Matrix, x: &[f64]) -> Vec<f64> {
        self.push(&link.matvec(&self.pull(x)))
    }

    fn apply_t(&self, link: &Matrix, x: &[f64]) -> Vec<f64> {
        self.push(&link.transpose().matvec(&self.pull(x)))
    }

    fn sandwich(&self, a: &Matrix, x: &[f64], b: &Matrix) -> Vec<f64> {
        let t = a.matmul(&self.weighted_gram(x)).matmul(b);
        self.diag(&t)
    }

    fn cycle3(&self, a: &Matrix, b: &Matrix, c: &Matrix, w: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let t = self
            .weighted_gram(w)
            .matmul(a)
            .matmul(&self.weighted_gram(x))
            .matmul(b)
            .matmul(&self.weighted_gram(y))
            .matmul(c);
        t.trace()
    }

    fn triple_edge(&self, a: &Matrix, b: &Matrix, c: &Matrix, x: &[f64], y: &[f64]) -> f64 {
        let ka = self.kernel_matrix(a);
        let kb = self.kernel_matrix(b);
        let kc = self.kernel_matrix(c);
        let n = self.len();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += y[j] * ka[(i, j)] * kb[(j, i)] * kc[(i, j)];
            }
            rows.push(x[i] * s);
        }
        crate::cells::pairwise_sum(&rows)
    }
}
