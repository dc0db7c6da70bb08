//! Dyadic cells of `[0,1)^d` and functions that are constant on them.
//!
//! Cells at level `L` are the `2^(L d)` cubes of side `2^-L`. They are stored
//! in Morton (Z-) order, so the children of a cell at level `L` occupy a
//! contiguous run of `2^d` indices at level `L + 1`, and the ancestor of cell
//! `c` at level `l <= L` is `c >> (d (L - l))`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest `level * dim` supported by cell indexing.
pub const MAX_CELL_BITS: u32 = 26;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

pub(crate) fn check_level(dim: usize, level: u32) -> Result<()> {
    check_dim(dim)?;
    if level * dim as u32 > MAX_CELL_BITS {
        return Err(Error::LevelTooDeep(level));
    }
    Ok(())
}

/// Number of cells at `level`.
#[inline]
pub fn cell_count(dim: usize, level: u32) -> usize {
    1usize << (level as usize * dim)
}

/// Per-axis integer coordinates of a point at `level`.
fn axis_index(x: f64, level: u32) -> Result<u64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::PointOutsideDomain);
    }
    let scaled = x * (1u64 << level) as f64;
    Ok(libm::floor(scaled) as u64)
}

/// Interleave per-axis coordinates into a Morton index (axis 0 most significant).
#[inline]
pub fn morton(coords: [u64; 2], dim: usize, level: u32) -> usize {
    if dim == 1 {
        return coords[0] as usize;
    }
    let mut idx = 0usize;
    for b in 0..level {
        let x = ((coords[0] >> b) & 1) as usize;
        let y = ((coords[1] >> b) & 1) as usize;
        idx |= x << (2 * b + 1);
        idx |= y << (2 * b);
    }
    idx
}

/// Inverse of [`morton`].
#[inline]
pub fn demorton(index: usize, dim: usize, level: u32) -> [u64; 2] {
    if dim == 1 {
        return [index as u64, 0];
    }
    let mut c = [0u64; 2];
    for b in 0..level {
        c[0] |= (((index >> (2 * b + 1)) & 1) as u64) << b;
        c[1] |= (((index >> (2 * b)) & 1) as u64) << b;
    }
    c
}

/// Morton index of the level-`level` cell containing `z`.
pub fn cell_of(z: &[f64], dim: usize, level: u32) -> Result<usize> {
    if z.len() != dim {
        return Err(Error::ShapeMismatch("point dimension"));
    }
    let mut coords = [0u64; 2];
    for (c, &x) in coords.iter_mut().zip(z) {
        *c = axis_index(x, level)?;
    }
    Ok(morton(coords, dim, level))
}

/// Midpoint of a cell.
pub fn cell_midpoint(index: usize, dim: usize, level: u32) -> [f64; 2] {
    let c = demorton(index, dim, level);
    let side = 1.0 / (1u64 << level) as f64;
    let mut p = [0.0; 2];
    for a in 0..dim {
        p[a] = (c[a] as f64 + 0.5) * side;
    }
    p
}

/// Lower corner of a cell.
pub fn cell_corner(index: usize, dim: usize, level: u32) -> [f64; 2] {
    let c = demorton(index, dim, level);
    let side = 1.0 / (1u64 << level) as f64;
    let mut p = [0.0; 2];
    for a in 0..dim {
        p[a] = c[a] as f64 * side;
    }
    p
}

/// Volume of one cell at `level`.
#[inline]
pub fn cell_volume(dim: usize, level: u32) -> f64 {
    1.0 / cell_count(dim, level) as f64
}

/// A function on `[0,1)^d` that is constant on each cell at a fixed level.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction {
    dim: usize,
    level: u32,
    values: Vec<f64>,
}

impl CellFunction {
    pub fn new(dim: usize, level: u32, values: Vec<f64>) -> Result<Self> {
        check_level(dim, level)?;
        if values.len() != cell_count(dim, level) {
            return Err(Error::ShapeMismatch("cell value count"));
        }
        Ok(Self { dim, level, values })
    }

    pub fn constant(dim: usize, level: u32, value: f64) -> Result<Self> {
        check_level(dim, level)?;
        Ok(Self {
            dim,
            level,
            values: vec![value; cell_count(dim, level)],
        })
    }

    /// Samples `f` at the cell midpoints.
    pub fn from_fn(dim: usize, level: u32, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        check_level(dim, level)?;
        let values = (0..cell_count(dim, level))
            .map(|c| f(&cell_midpoint(c, dim, level)[..dim]))
            .collect();
        Ok(Self { dim, level, values })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.level
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        cell_volume(self.dim, self.level)
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        Ok(self.values[cell_of(z, self.dim, self.level)?])
    }

    /// Value on the level-`level` cell `index`, for `level >= self.level`.
    #[inline]
    pub fn value_at(&self, index: usize, level: u32) -> f64 {
        debug_assert!(level >= self.level);
        self.values[index >> (self.dim * (level - self.level) as usize)]
    }

    /// Exact integral against Lebesgue measure.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            level: self.level,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Re-expresses the function on a finer level.
    pub fn refine(&self, level: u32) -> Result<Self> {
        if level < self.level {
            return Err(Error::InvalidParameter("refine level below current level"));
        }
        check_level(self.dim, level)?;
        let values = (0..cell_count(self.dim, level))
            .map(|c| self.value_at(c, level))
            .collect();
        Ok(Self {
            dim: self.dim,
            level,
            values,
        })
    }

    /// Cell averages on a coarser level (the `L2` projection onto that level).
    pub fn coarsen(&self, level: u32) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidParameter("coarsen level above current level"));
        }
        let shift = self.dim * (self.level - level) as usize;
        let group = 1usize << shift;
        let values = self
            .values
            .chunks(group)
            .map(|ch| pairwise_sum(ch) / group as f64)
            .collect();
        Ok(Self {
            dim: self.dim,
            level,
            values,
        })
    }

    /// Both functions expressed on the finer of the two levels.
    fn aligned<'a>(&'a self, other: &'a Self) -> Result<(u32, Self, Self)> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch("cell function dimension"));
        }
        let level = self.level.max(other.level);
        Ok((level, self.refine(level)?, other.refine(level)?))
    }

    /// Pointwise combination on the finer of the two levels.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (level, a, b) = self.aligned(other)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Self {
            dim: self.dim,
            level,
            values,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x / y)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `∫ self * other dν`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        Ok(self.mul(other)?.integral())
    }

    /// `(∫ |self|^p dν)^(1/p)`, with `p = ∞` the sup norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s: Vec<f64> = self.values.iter().map(|v| libm::pow(v.abs(), p)).collect();
        libm::pow(pairwise_sum(&s) * self.cell_volume(), 1.0 / p)
    }

    /// Integrals of the function over the cells of a (possibly coarser or finer)
    /// level: entry `c` is `∫_{cell c} f dν`.
    pub fn cell_masses(&self, level: u32) -> Result<Vec<f64>> {
        check_level(self.dim, level)?;
        if level >= self.level {
            let vol = cell_volume(self.dim, level);
            Ok((0..cell_count(self.dim, level))
                .map(|c| self.value_at(c, level) * vol)
                .collect())
        } else {
            let vol = self.cell_volume();
            let group = 1usize << (self.dim * (self.level - level) as usize);
            Ok(self
                .values
                .chunks(group)
                .map(|ch| pairwise_sum(ch) * vol)
                .collect())
        }
    }
}

/// Sums in a fixed pairwise tree, independent of any parallel split.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn morton_roundtrip_and_parent_shift() {
        for level in 0..5u32 {
            for idx in 0..cell_count(2, level) {
                let c = demorton(idx, 2, level);
                assert_eq!(morton(c, 2, level), idx);
            }
        }
        // parent of a level-3 cell at level 1 is a right shift by 2*(3-1) bits
        let z = [0.7, 0.2];
        let fine = cell_of(&z, 2, 3).unwrap();
        let coarse = cell_of(&z, 2, 1).unwrap();
        assert_eq!(fine >> 4, coarse);
    }

    #[test]
    fn points_on_the_upper_face_are_rejected() {
        assert_eq!(cell_of(&[1.0], 1, 3), Err(Error::PointOutsideDomain));
        assert_eq!(cell_of(&[-0.1], 1, 3), Err(Error::PointOutsideDomain));
        // cells are half-open: 0.5 belongs to the right cell
        assert_eq!(cell_of(&[0.5], 1, 1).unwrap(), 1);
    }

    #[test]
    fn coarsen_and_refine_preserve_integral() {
        let f = CellFunction::from_fn(2, 3, |z| z[0] * z[0] + 3.0 * z[1]).unwrap();
        let c = f.coarsen(1).unwrap();
        assert!((c.integral() - f.integral()).abs() < 1e-14);
        let r = c.refine(4).unwrap();
        assert!((r.integral() - f.integral()).abs() < 1e-14);
        let masses = f.cell_masses(2).unwrap();
        assert!((masses.iter().sum::<f64>() - f.integral()).abs() < 1e-14);
    }

    #[test]
    fn pairwise_sum_matches_naive_for_small_inputs() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.25).collect();
        assert_eq!(pairwise_sum(&xs), xs.iter().sum::<f64>());
    }
}
