//! Tensor Haar basis on `[0,1)^d`, dyadic grids and exact cell quadrature.
//!
//! Indices are 0-based. Index 0 is the father function. Level `i >= 1`
//! occupies indices `2^((i-1)d) .. 2^(i d)`, ordered lexicographically by
//! `(v, j)` where `v ∈ {0,1}^d \ {0}` selects mother/father per axis (axis 0
//! most significant) and `j` is the translation, again axis 0 most
//! significant. Level `i` wavelets have dilation `s = i - 1`, so the prefix of
//! length `2^(i d)` spans the functions constant on level-`i` cells.

use alloc::vec::Vec;
use core::ops::Range;

use crate::cells::{self, cell_count, cell_midpoint, check_level, CellFunction};
use crate::error::{Error, Result};

/// Decoded position of a basis function in the multiresolution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    /// Resolution level, 0 for the father function.
    pub level: u32,
    /// Mother/father selector per axis.
    pub v: [u8; 2],
    /// Translation per axis.
    pub j: [u64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    dim: usize,
    max_level: u32,
}

impl Basis {
    pub fn new(dim: usize, max_level: u32) -> Result<Self> {
        check_level(dim, max_level)?;
        Ok(Self { dim, max_level })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Total number of basis functions, `2^(I_max d)`.
    #[inline]
    pub fn len(&self) -> usize {
        prefix_size(self.dim, self.max_level)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, index: usize) -> Result<Element> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok(decode(index, self.dim))
    }

    /// Value of basis function `index` at `z`.
    pub fn eval(&self, index: usize, z: &[f64]) -> Result<f64> {
        let el = self.element(index)?;
        if z.len() != self.dim {
            return Err(Error::ShapeMismatch("point dimension"));
        }
        if z.iter().any(|x| !(0.0..1.0).contains(x)) {
            return Err(Error::PointOutsideDomain);
        }
        Ok(eval_element(&el, z, self.dim))
    }

    /// The nonzero basis values at `z` among indices `< limit`, in index order.
    ///
    /// At most `1 + (2^d - 1) I_max` entries.
    pub fn support_at(&self, z: &[f64], limit: usize) -> Result<Vec<(usize, f64)>> {
        if z.len() != self.dim {
            return Err(Error::ShapeMismatch("point dimension"));
        }
        let top = cells::cell_of(z, self.dim, self.max_level)?;
        let coords = cells::demorton(top, self.dim, self.max_level);
        let mut out = Vec::new();
        if limit == 0 {
            return Ok(out);
        }
        out.push((0, 1.0));
        let nv = (1usize << self.dim) - 1;
        for level in 1..=self.max_level {
            let s = level - 1;
            let base = prefix_size(self.dim, s);
            if base >= limit {
                break;
            }
            let scale = libm::pow(2.0, 0.5 * (s as f64) * self.dim as f64);
            // per-axis translation and which half of the support we are in
            let mut j = [0u64; 2];
            let mut sign = [1.0f64; 2];
            for a in 0..self.dim {
                let fine = coords[a] >> (self.max_level - level);
                j[a] = fine >> 1;
                sign[a] = if fine & 1 == 0 { 1.0 } else { -1.0 };
            }
            let j_rank = if self.dim == 1 {
                j[0] as usize
            } else {
                ((j[0] as usize) << s) | j[1] as usize
            };
            for v_rank in 0..nv {
                let v = v_rank + 1;
                let idx = base + v_rank * base + j_rank;
                if idx >= limit {
                    continue;
                }
                let mut val = scale;
                for a in 0..self.dim {
                    let bit = (v >> (self.dim - 1 - a)) & 1;
                    if bit == 1 {
                        val *= sign[a];
                    }
                }
                out.push((idx, val));
            }
        }
        out.sort_unstable_by_key(|p| p.0);
        Ok(out)
    }

    /// First `limit` basis values at `z`, as a dense vector.
    pub fn values_at(&self, z: &[f64], limit: usize) -> Result<Vec<f64>> {
        if limit > self.len() {
            return Err(Error::IndexOutOfRange {
                index: limit,
                len: self.len(),
            });
        }
        let mut out = alloc::vec![0.0; limit];
        for (i, v) in self.support_at(z, limit)? {
            out[i] = v;
        }
        Ok(out)
    }

    /// Basis function `index` as a cell function at level `I_max`.
    pub fn cell_function(&self, index: usize) -> Result<CellFunction> {
        let el = self.element(index)?;
        CellFunction::from_fn(self.dim, self.max_level, |z| eval_element(&el, z, self.dim))
    }

    /// Resolution level spanned by a prefix, if `size` is admissible.
    pub fn prefix_level(&self, size: usize) -> Option<u32> {
        prefix_level(self.dim, size).filter(|&l| l <= self.max_level)
    }
}

/// `2^(level d)`.
#[inline]
pub fn prefix_size(dim: usize, level: u32) -> usize {
    1usize << (level as usize * dim)
}

/// Level `i` with `2^(i d) = size`, if any.
pub fn prefix_level(dim: usize, size: usize) -> Option<u32> {
    if size == 0 || !size.is_power_of_two() {
        return None;
    }
    let bits = size.trailing_zeros() as usize;
    if bits % dim == 0 {
        Some((bits / dim) as u32)
    } else {
        None
    }
}

fn decode(index: usize, dim: usize) -> Element {
    if index == 0 {
        return Element {
            level: 0,
            v: [0; 2],
            j: [0; 2],
        };
    }
    let mut level = 1u32;
    while index >= prefix_size(dim, level) {
        level += 1;
    }
    let s = level - 1;
    let base = prefix_size(dim, s);
    let offset = index - base;
    let v_code = offset / base + 1;
    let j_rank = offset % base;
    let mut v = [0u8; 2];
    let mut j = [0u64; 2];
    for a in 0..dim {
        v[a] = ((v_code >> (dim - 1 - a)) & 1) as u8;
    }
    if dim == 1 {
        j[0] = j_rank as u64;
    } else {
        j[0] = (j_rank >> s) as u64;
        j[1] = (j_rank & ((1usize << s) - 1)) as u64;
    }
    Element { level, v, j }
}

fn eval_element(el: &Element, z: &[f64], dim: usize) -> f64 {
    if el.level == 0 {
        return 1.0;
    }
    let s = el.level - 1;
    let mut val = libm::pow(2.0, 0.5 * (s as f64) * dim as f64);
    for a in 0..dim {
        let pos = libm::floor(z[a] * (1u64 << (s + 1)) as f64) as u64;
        if pos >> 1 != el.j[a] {
            return 0.0;
        }
        if el.v[a] == 1 && pos & 1 == 1 {
            val = -val;
        }
    }
    val
}

/// Indices `lo..hi` of the block `(lo, hi]` in 1-based interval notation.
pub fn block_indices(basis: &Basis, lo: usize, hi: usize) -> Result<Range<usize>> {
    if lo >= hi {
        return Err(Error::InvalidParameter("block needs lo < hi"));
    }
    if hi > basis.len() {
        return Err(Error::IndexOutOfRange {
            index: hi,
            len: basis.len(),
        });
    }
    for e in [lo, hi] {
        if e != 0 && basis.prefix_level(e).is_none() {
            return Err(Error::NotAdmissible(e));
        }
    }
    Ok(lo..hi)
}

/// Midpoint rule on the cells of one level; exact for functions constant on
/// those cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    dim: usize,
    level: u32,
}

impl QuadratureRule {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        check_level(dim, level)?;
        Ok(Self { dim, level })
    }

    /// Rule at the finest level of `basis`.
    pub fn for_basis(basis: &Basis) -> Self {
        Self {
            dim: basis.dim(),
            level: basis.max_level(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        cell_count(self.dim, self.level)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        cells::cell_volume(self.dim, self.level)
    }

    pub fn midpoint(&self, cell: usize) -> [f64; 2] {
        cell_midpoint(cell, self.dim, self.level)
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.len());
        for c in 0..self.len() {
            let v = f(&self.midpoint(c)[..self.dim]);
            if !v.is_finite() {
                return Err(Error::NonFinite("integrand"));
            }
            vals.push(v);
        }
        Ok(cells::pairwise_sum(&vals) * self.volume())
    }
}

/// Block grids for the truncated estimator.
///
/// `k_grid[r]` is `k_r` for `r = 0..=R` and `l_grid[s]` is `l_s`; both end at
/// `k`. The first block of each grid is taken as `(0, k_0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicGrid {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k_grid: Vec<usize>,
    pub l_grid: Vec<usize>,
}

/// Admissible prefix size nearest to `x` on a log scale.
pub fn round_to_prefix(x: f64, dim: usize) -> usize {
    if !(x > 1.0) {
        return 1;
    }
    let i = libm::round(libm::log2(x) / dim as f64).max(0.0) as u32;
    prefix_size(dim, i)
}

impl DyadicGrid {
    pub fn build(n: usize, k: usize, alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        cells::check_dim(dim)?;
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidParameter("smoothness must be positive"));
        }
        if k < n {
            return Err(Error::InvalidParameter("k must be at least n"));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive"));
        }
        let k_top = round_to_prefix(k as f64, dim);
        let k_grid = Self::grid(n, k_top, alpha, dim);
        let l_grid = Self::grid(n, k_top, beta, dim);
        Ok(Self {
            dim,
            n,
            k: k_top,
            alpha,
            beta,
            k_grid,
            l_grid,
        })
    }

    fn grid(n: usize, k: usize, smooth: f64, dim: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let mut r = 0i32;
        loop {
            let target = n as f64 * libm::pow(2.0, r as f64 / smooth);
            let v = round_to_prefix(target, dim).min(k);
            if out.last() != Some(&v) {
                out.push(v);
            }
            if v >= k {
                break;
            }
            r += 1;
        }
        out
    }

    /// `R`, the last block index of the `k` grid.
    pub fn r_max(&self) -> usize {
        self.k_grid.len() - 1
    }

    /// `S`, the last block index of the `l` grid.
    pub fn s_max(&self) -> usize {
        self.l_grid.len() - 1
    }

    /// `k_r` with `k_{-1}` read as the empty prefix.
    pub fn k_at(&self, r: isize) -> usize {
        Self::at(&self.k_grid, r)
    }

    /// `l_s` with the extension rule `l_s = l_{-1}` for `s < 0`, `l_S` past the end.
    pub fn l_at(&self, s: isize) -> usize {
        Self::at(&self.l_grid, s)
    }

    fn at(grid: &[usize], r: isize) -> usize {
        if r < 0 {
            0
        } else {
            grid[(r as usize).min(grid.len() - 1)]
        }
    }

    /// Whether block pair `(r, s)` is kept for cutoff `D`.
    pub fn retained(r: usize, s: usize, cutoff: usize) -> bool {
        r == 0 || s == 0 || r + s <= cutoff
    }

    /// Retained `(r, s)` pairs in row-major order.
    pub fn retained_pairs(&self, cutoff: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..=self.r_max() {
            for s in 0..=self.s_max() {
                if Self::retained(r, s, cutoff) {
                    out.push((r, s));
                }
            }
        }
        out
    }
}

/// Default projection dimension `n^(2d/(2α+2β+d))`, rounded to a prefix size.
pub fn default_k(n: usize, alpha: f64, beta: f64, dim: usize) -> usize {
    let d = dim as f64;
    round_to_prefix(libm::pow(n as f64, 2.0 * d / (2.0 * alpha + 2.0 * beta + d)), dim)
}

/// Default hyperbola cutoff solving `2^((1/α ∨ 1/β) D) = n^((d-2α-2β)/(d+2α+2β)) / ln n`,
/// rounded and floored at zero.
pub fn default_cutoff(n: usize, alpha: f64, beta: f64, dim: usize) -> usize {
    let d = dim as f64;
    let nf = n as f64;
    let rhs = libm::pow(nf, (d - 2.0 * alpha - 2.0 * beta) / (d + 2.0 * alpha + 2.0 * beta))
        / libm::log(nf);
    let rate = f64::max(1.0 / alpha, 1.0 / beta);
    let dval = libm::log2(rhs) / rate;
    if dval.is_finite() && dval > 0.0 {
        libm::round(dval) as usize
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn father_and_first_mother() {
        let b = Basis::new(1, 3).unwrap();
        assert_eq!(b.eval(0, &[0.3]).unwrap(), 1.0);
        assert_eq!(b.eval(1, &[0.25]).unwrap(), 1.0);
        assert_eq!(b.eval(1, &[0.75]).unwrap(), -1.0);
        assert!(matches!(b.eval(8, &[0.1]), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(b.eval(1, &[1.0]), Err(Error::PointOutsideDomain));
    }

    #[test]
    fn level_two_block_in_one_dimension() {
        let b = Basis::new(1, 3).unwrap();
        assert_eq!(block_indices(&b, 2, 4).unwrap(), 2..4);
        assert_eq!(b.element(2).unwrap().level, 2);
        assert_eq!(b.element(3).unwrap().j[0], 1);
        assert_eq!(block_indices(&b, 3, 4), Err(Error::NotAdmissible(3)));
    }

    #[test]
    fn support_matches_dense_evaluation() {
        for dim in [1, 2] {
            let b = Basis::new(dim, 3).unwrap();
            let z = [0.61, 0.27];
            let support = b.support_at(&z[..dim], b.len()).unwrap();
            for idx in 0..b.len() {
                let direct = b.eval(idx, &z[..dim]).unwrap();
                let sparse = support
                    .iter()
                    .find(|p| p.0 == idx)
                    .map_or(0.0, |p| p.1);
                assert_eq!(direct, sparse, "dim {dim} idx {idx}");
            }
        }
    }

    #[test]
    fn grid_examples() {
        let g = DyadicGrid::build(16, 16, 0.5, 0.5, 1).unwrap();
        assert_eq!((g.r_max(), g.s_max()), (0, 0));
        let g = DyadicGrid::build(16, 64, 1.0, 2.0, 1).unwrap();
        assert_eq!(g.k_grid, [16, 32, 64]);
        assert_eq!(g.k_at(-1), 0);
        assert_eq!(g.l_at(-3), 0);
        assert_eq!(g.l_at(99), 64);
        assert!(DyadicGrid::build(16, 8, 1.0, 1.0, 1).is_err());
        assert!(DyadicGrid::build(16, 32, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn retained_pairs_for_cutoff_two() {
        let count = (0..=4)
            .flat_map(|r| (0..=4).map(move |s| (r, s)))
            .filter(|&(r, s)| DyadicGrid::retained(r, s, 2))
            .count();
        // r = 0 row (5) + s = 0 column (4 more) + (1,1)
        assert_eq!(count, 10);
    }
}
