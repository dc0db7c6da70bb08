use alloc::vec::Vec;

use crate::basis::{prefix_size, Basis};
use crate::cells::CellFunction;
use crate::error::{Error, Result};
use crate::rng;

/// Random Haar series with coefficients `±2^{-s(α + d/2)}` at dilation `s`.
///
/// The father coefficient is zero, so the function integrates to zero.
/// `α = ∞` gives the zero function.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFunction {
    basis: Basis,
    alpha: f64,
    seed: u64,
    coefficients: Vec<f64>,
}

impl HolderFunction {
    pub fn new(dim: usize, level: u32, alpha: f64, seed: u64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter("smoothness must be positive"));
        }
        let basis = Basis::new(dim, level)?;
        let mut coefficients = alloc::vec![0.0; basis.len()];
        if alpha.is_finite() {
            let mut r = rng::stream(seed, 0);
            for s in 0..level {
                let lo = prefix_size(dim, s);
                let hi = prefix_size(dim, s + 1);
                let mag = libm::pow(2.0, -(s as f64) * (alpha + dim as f64 / 2.0));
                for c in &mut coefficients[lo..hi] {
                    *c = rng::sign(&mut r) * mag;
                }
            }
        }
        Ok(Self {
            basis,
            alpha,
            seed,
            coefficients,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// The series as a function constant on the finest cells.
    pub fn synthesize(&self) -> Result<CellFunction> {
        let b = &self.basis;
        let dim = b.dim();
        let level = b.max_level();
        let rule = crate::basis::QuadratureRule::for_basis(b);
        let mut values = Vec::with_capacity(rule.len());
        for cell in 0..rule.len() {
            let z = rule.midpoint(cell);
            let mut s = 0.0;
            for (idx, v) in b.support_at(&z[..dim], b.len())? {
                s += self.coefficients[idx] * v;
            }
            values.push(s);
        }
        CellFunction::new(dim, level, values)
    }
}
