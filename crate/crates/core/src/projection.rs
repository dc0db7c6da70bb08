//! Weighted `L2` projections onto spans of Haar basis functions.
//!
//! A projection onto index set `I` under weight `w` has kernel
//! `Π(z1, z2) = e(z1)ᵀ C⁻¹ e(z2)` with `C_ij = ∫ e_i e_j w dν`. Blocks
//! `(lo, hi]` are represented as `Π^(0,hi] - Π^(0,lo]`, which is the projection
//! onto the block after `w`-orthogonalizing it against the lower prefix.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{Basis, QuadratureRule};
use crate::cells::CellFunction;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// Coefficients and function of a projected function.
#[derive(Debug, Clone)]
pub struct Projected {
    /// Coefficients on [`WeightedProjection::span`].
    pub coefficients: Vec<f64>,
    pub function: CellFunction,
}

#[derive(Debug, Clone)]
pub struct WeightedProjection {
    basis: Basis,
    indices: Vec<usize>,
    span: Vec<usize>,
    weight: CellFunction,
    level: u32,
    gram: Matrix,
    chol: Cholesky,
    lower: Option<Box<WeightedProjection>>,
}

fn check_weight(w: &CellFunction) -> Result<()> {
    if w.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection weight"));
    }
    let min = w.min();
    if !(min > 0.0) {
        return Err(Error::WeightNotPositive { min });
    }
    Ok(())
}

impl WeightedProjection {
    /// Projection onto the span of `indices` (any set of distinct indices).
    pub fn build(
        basis: &Basis,
        indices: &[usize],
        weight: &CellFunction,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        check_weight(weight)?;
        if weight.dim() != basis.dim() || rule.dim() != basis.dim() {
            return Err(Error::ShapeMismatch("projection dimension"));
        }
        if rule.level() < basis.max_level() || rule.level() < weight.level() {
            return Err(Error::ShapeMismatch("quadrature level below integrand level"));
        }
        let mut span = indices.to_vec();
        span.sort_unstable();
        span.dedup();
        if span.len() != indices.len() {
            return Err(Error::InvalidParameter("repeated basis index"));
        }
        if let Some(&last) = span.last() {
            if last >= basis.len() {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    len: basis.len(),
                });
            }
        }
        let k = span.len();
        let mut gram = Matrix::zeros(k, k);
        let limit = span.last().map_or(0, |&l| l + 1);
        let vol = rule.volume();
        let mut local: Vec<(usize, f64)> = Vec::new();
        for cell in 0..rule.len() {
            let z = rule.midpoint(cell);
            let wv = weight.value_at(cell, rule.level()) * vol;
            local.clear();
            for (idx, v) in basis.support_at(&z[..basis.dim()], limit)? {
                if let Ok(pos) = span.binary_search(&idx) {
                    local.push((pos, v));
                }
            }
            for &(p, vp) in &local {
                for &(q, vq) in &local {
                    gram[(p, q)] += wv * vp * vq;
                }
            }
        }
        let chol = Cholesky::new(&gram)?;
        Ok(Self {
            basis: *basis,
            indices: span.clone(),
            span,
            weight: weight.clone(),
            level: rule.level(),
            gram,
            chol,
            lower: None,
        })
    }

    /// Projection onto the prefix `(0, size]`.
    pub fn prefix(
        basis: &Basis,
        size: usize,
        weight: &CellFunction,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let idx: Vec<usize> = (0..size).collect();
        Self::build(basis, &idx, weight, rule)
    }

    /// Projection onto block `(lo, hi]`, orthogonalized against `(0, lo]`.
    pub fn block(
        basis: &Basis,
        lo: usize,
        hi: usize,
        weight: &CellFunction,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let range = crate::basis::block_indices(basis, lo, hi)?;
        let mut upper = Self::prefix(basis, hi, weight, rule)?;
        if lo > 0 {
            upper.lower = Some(Box::new(Self::prefix(basis, lo, weight, rule)?));
        }
        upper.indices = range.collect();
        Ok(upper)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Nominal index set (the block for block projections).
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Rank of the projection.
    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    /// Indices carrying the Gram matrix and coefficient vectors.
    pub fn span(&self) -> &[usize] {
        &self.span
    }

    pub fn weight(&self) -> &CellFunction {
        &self.weight
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn quadrature(&self) -> QuadratureRule {
        QuadratureRule::new(self.basis.dim(), self.level).expect("validated at build")
    }

    fn features(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut e = vec![0.0; self.span.len()];
        let limit = self.span.last().map_or(0, |&l| l + 1);
        for (idx, v) in self.basis.support_at(z, limit)? {
            if let Ok(pos) = self.span.binary_search(&idx) {
                e[pos] = v;
            }
        }
        Ok(e)
    }

    fn own_kernel(&self, z1: &[f64], z2: &[f64]) -> Result<f64> {
        let e1 = self.features(z1)?;
        let e2 = self.features(z2)?;
        let y = self.chol.solve(&e2);
        Ok(crate::linalg::dot(&e1, &y))
    }

    /// `Π(z1, z2)`.
    pub fn kernel(&self, z1: &[f64], z2: &[f64]) -> Result<f64> {
        let mut v = self.own_kernel(z1, z2)?;
        if let Some(lower) = &self.lower {
            v -= lower.own_kernel(z1, z2)?;
        }
        Ok(v)
    }

    /// `(Σ_{i,j} Π(x_i, x_j), Σ_i Π(x_i, x_i))` over the points.
    pub fn sample_sums(&self, points: &[&[f64]]) -> Result<(f64, f64)> {
        let k = self.span.len();
        let mut total = vec![0.0; k];
        let mut diag = Vec::with_capacity(points.len());
        for z in points {
            let e = self.features(z)?;
            diag.push(crate::linalg::dot(&e, &self.chol.solve(&e)));
            for (t, v) in total.iter_mut().zip(&e) {
                *t += v;
            }
        }
        let mut all = crate::linalg::dot(&total, &self.chol.solve(&total));
        let mut d = crate::cells::pairwise_sum(&diag);
        if let Some(lower) = &self.lower {
            let (la, ld) = lower.sample_sums(points)?;
            all -= la;
            d -= ld;
        }
        Ok((all, d))
    }

    /// Coefficients of `z ↦ Π(z1, z)` on [`Self::span`].
    pub fn section_coefficients(&self, z1: &[f64]) -> Result<Vec<f64>> {
        let mut c = self.chol.solve(&self.features(z1)?);
        if let Some(lower) = &self.lower {
            let lc = lower.section_coefficients(z1)?;
            for (a, b) in c.iter_mut().zip(lc) {
                *a -= b;
            }
        }
        Ok(c)
    }

    /// `z ↦ Π(z1, z)` as a cell function at the quadrature level.
    pub fn section(&self, z1: &[f64]) -> Result<CellFunction> {
        let c = self.section_coefficients(z1)?;
        self.synthesize(&c)
    }

    /// `Σ_i c_i e_i` over the span, at the quadrature level.
    pub fn synthesize(&self, coefficients: &[f64]) -> Result<CellFunction> {
        if coefficients.len() != self.span.len() {
            return Err(Error::ShapeMismatch("coefficient count"));
        }
        let rule = self.quadrature();
        let limit = self.span.last().map_or(0, |&l| l + 1);
        let mut values = Vec::with_capacity(rule.len());
        for cell in 0..rule.len() {
            let z = rule.midpoint(cell);
            let mut s = 0.0;
            for (idx, v) in self.basis.support_at(&z[..self.basis.dim()], limit)? {
                if let Ok(pos) = self.span.binary_search(&idx) {
                    s += coefficients[pos] * v;
                }
            }
            values.push(s);
        }
        CellFunction::new(self.basis.dim(), self.level, values)
    }

    /// `(∫ f e_i w dν)_i` over the span.
    pub fn moments(&self, f: &CellFunction) -> Result<Vec<f64>> {
        if f.dim() != self.basis.dim() {
            return Err(Error::ShapeMismatch("function dimension"));
        }
        let rule = self.quadrature();
        let level = rule.level().max(f.level());
        let fine = QuadratureRule::new(self.basis.dim(), level)?;
        let vol = fine.volume();
        let limit = self.span.last().map_or(0, |&l| l + 1);
        let mut b = vec![0.0; self.span.len()];
        for cell in 0..fine.len() {
            let fw = f.value_at(cell, level) * self.weight.value_at(cell, level) * vol;
            if fw == 0.0 {
                continue;
            }
            let z = fine.midpoint(cell);
            for (idx, v) in self.basis.support_at(&z[..self.basis.dim()], limit)? {
                if let Ok(pos) = self.span.binary_search(&idx) {
                    b[pos] += fw * v;
                }
            }
        }
        Ok(b)
    }

    fn own_coefficients(&self, f: &CellFunction) -> Result<Vec<f64>> {
        Ok(self.chol.solve(&self.moments(f)?))
    }

    /// `Πf`. For a block, the coefficients are those of the difference of the
    /// two prefix projections, expressed on the upper prefix.
    pub fn project(&self, f: &CellFunction) -> Result<Projected> {
        let mut c = self.own_coefficients(f)?;
        if let Some(lower) = &self.lower {
            let lc = lower.own_coefficients(f)?;
            for (a, b) in c.iter_mut().zip(lc) {
                *a -= b;
            }
        }
        let function = self.synthesize(&c)?;
        Ok(Projected {
            coefficients: c,
            function,
        })
    }

    /// `∫ Π(z, z) w(z) dν(z)`, which equals the rank.
    pub fn trace(&self) -> Result<f64> {
        let rule = self.quadrature();
        let mut vals = Vec::with_capacity(rule.len());
        for cell in 0..rule.len() {
            let z = rule.midpoint(cell);
            let z = &z[..self.basis.dim()];
            vals.push(self.kernel(z, z)? * self.weight.value_at(cell, rule.level()));
        }
        Ok(crate::cells::pairwise_sum(&vals) * rule.volume())
    }
}
