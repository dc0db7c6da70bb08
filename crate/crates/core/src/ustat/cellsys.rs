//! Links between observations for weighted projections onto resolution spaces.
//!
//! The weighted projection onto the functions constant on level-`l` cells has
//! kernel `A_l(z1, z2) = 1[z1, z2 share a level-l cell] / W_l(cell)` with
//! `W_l(cell) = ∫_cell w dν`. Composition through the weight collapses to the
//! coarser level, `A_l H A_l' = A_{min(l, l')}`, and "sharing a cell" is an
//! ultrametric relation, so every primitive reduces to per-cell aggregates.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::cells::{self, CellFunction};
use crate::error::{Error, Result};
use crate::ustat::chain::LinkSystem;

/// `Σ_t c_t A_{l_t}`, kept sorted by level with no repeated levels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelCombo {
    terms: Vec<(u32, f64)>,
}

impl LevelCombo {
    pub fn new(terms: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut t: Vec<(u32, f64)> = terms.into_iter().collect();
        t.sort_by_key(|p| p.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(t.len());
        for (l, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == l => last.1 += c,
                _ => out.push((l, c)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        Self { terms: out }
    }

    pub fn single(level: u32) -> Self {
        Self {
            terms: vec![(level, 1.0)],
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_level(&self) -> Option<u32> {
        self.terms.last().map(|p| p.0)
    }
}

/// Weight masses `W_l(cell)` for every level up to a maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMasses {
    dim: usize,
    masses: Vec<Vec<f64>>,
}

impl LevelMasses {
    pub fn new(weight: &CellFunction, max_level: u32) -> Result<Self> {
        let dim = weight.dim();
        cells::check_level(dim, max_level)?;
        let mut masses = Vec::with_capacity(max_level as usize + 1);
        for l in 0..=max_level {
            let m = weight.cell_masses(l)?;
            let min = m.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(Error::WeightNotPositive { min });
            }
            masses.push(m);
        }
        Ok(Self { dim, masses })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> u32 {
        (self.masses.len() - 1) as u32
    }

    /// `W_l` per level-`l` cell.
    pub fn at(&self, level: u32) -> &[f64] {
        &self.masses[level as usize]
    }
}

/// Observations located at cells of a fixed level, with per-cell weight masses.
#[derive(Debug, Clone)]
pub struct CellSystem {
    dim: usize,
    level: u32,
    cells: Vec<usize>,
    masses: Arc<LevelMasses>,
}

impl CellSystem {
    /// `cells[i]` is observation `i`'s cell at `level`; `weight` supplies `W_l`.
    pub fn new(dim: usize, level: u32, cells: Vec<usize>, weight: &CellFunction) -> Result<Self> {
        if weight.dim() != dim {
            return Err(Error::ShapeMismatch("weight dimension"));
        }
        Self::with_masses(level, cells, Arc::new(LevelMasses::new(weight, level)?))
    }

    /// Shares precomputed masses; `level` must not exceed theirs.
    pub fn with_masses(level: u32, cells: Vec<usize>, masses: Arc<LevelMasses>) -> Result<Self> {
        let dim = masses.dim();
        cells::check_level(dim, level)?;
        if level > masses.max_level() {
            return Err(Error::ShapeMismatch("cell level beyond weight masses"));
        }
        let count = cells::cell_count(dim, level);
        if cells.iter().any(|&c| c >= count) {
            return Err(Error::ShapeMismatch("cell index beyond level"));
        }
        Ok(Self {
            dim,
            level,
            cells,
            masses,
        })
    }

    /// Locates `points` (each of length `dim`) at `level`.
    pub fn from_points(dim: usize, level: u32, points: &[&[f64]], weight: &CellFunction) -> Result<Self> {
        let cells = points
            .iter()
            .map(|z| cells::cell_of(z, dim, level))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, level, cells, weight)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    #[inline]
    fn shift(&self, l: u32) -> usize {
        self.dim * (self.level - l) as usize
    }

    #[inline]
    fn anc(&self, i: usize, l: u32) -> usize {
        self.cells[i] >> self.shift(l)
    }

    #[inline]
    fn w(&self, l: u32, cell: usize) -> f64 {
        self.masses.at(l)[cell]
    }

    /// Per-cell sums of `x` at level `l`.
    fn bins(&self, x: &[f64], l: u32) -> Vec<f64> {
        let mut out = vec![0.0; cells::cell_count(self.dim, l)];
        let sh = self.shift(l);
        for (&c, &v) in self.cells.iter().zip(x) {
            out[c >> sh] += v;
        }
        out
    }

    fn check(&self, link: &LevelCombo) {
        debug_assert!(link.max_level().is_none_or(|l| l <= self.level));
    }

    /// Ratio `W_l(cell↑l)` for `cell` at level `from >= l`.
    #[inline]
    fn w_up(&self, l: u32, from: u32, cell: usize) -> f64 {
        self.w(l, cell >> (self.dim * (from - l) as usize))
    }
}

impl LinkSystem for CellSystem {
    type Link = LevelCombo;

    fn len(&self) -> usize {
        self.cells.len()
    }

    fn entry(&self, link: &LevelCombo, i: usize, j: usize) -> f64 {
        self.check(link);
        link.terms
            .iter()
            .filter(|&&(l, _)| self.anc(i, l) == self.anc(j, l))
            .map(|&(l, c)| c / self.w(l, self.anc(i, l)))
            .sum()
    }

    fn compose(&self, a: &LevelCombo, b: &LevelCombo) -> LevelCombo {
        LevelCombo::new(
            a.terms
                .iter()
                .flat_map(|&(la, ca)| b.terms.iter().map(move |&(lb, cb)| (la.min(lb), ca * cb))),
        )
    }

    fn diag(&self, link: &LevelCombo) -> Vec<f64> {
        self.check(link);
        (0..self.len())
            .map(|i| {
                link.terms
                    .iter()
                    .map(|&(l, c)| c / self.w(l, self.anc(i, l)))
                    .sum()
            })
            .collect()
    }

    fn apply(&self, link: &LevelCombo, x: &[f64]) -> Vec<f64> {
        self.check(link);
        let mut out = vec![0.0; self.len()];
        for &(l, c) in &link.terms {
            let b = self.bins(x, l);
            for (i, o) in out.iter_mut().enumerate() {
                let p = self.anc(i, l);
                *o += c * b[p] / self.w(l, p);
            }
        }
        out
    }

    fn apply_t(&self, link: &LevelCombo, x: &[f64]) -> Vec<f64> {
        self.apply(link, x)
    }

    fn sandwich(&self, a: &LevelCombo, x: &[f64], b: &LevelCombo) -> Vec<f64> {
        self.check(a);
        self.check(b);
        let mut out = vec![0.0; self.len()];
        for &(la, ca) in &a.terms {
            for &(lb, cb) in &b.terms {
                let m = la.max(lb);
                let bx = self.bins(x, m);
                for (i, o) in out.iter_mut().enumerate() {
                    let p = self.anc(i, m);
                    *o += ca * cb * bx[p] / (self.w_up(la, m, p) * self.w_up(lb, m, p));
                }
            }
        }
        out
    }

    fn cycle3(
        &self,
        a: &LevelCombo,
        b: &LevelCombo,
        c: &LevelCombo,
        w: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> f64 {
        let mut parts = Vec::new();
        for &(la, ca) in &a.terms {
            for &(lb, cb) in &b.terms {
                for &(lc, cc) in &c.terms {
                    let coef = ca * cb * cc;
                    // the edge at the finest level fixes the cell shared by its two
                    // endpoints; the third point meets them at the next finest level
                    let (top, u, v, rest, lo) = if la >= lb && la >= lc {
                        (la, w, x, y, lb.max(lc))
                    } else if lb >= lc {
                        (lb, x, y, w, la.max(lc))
                    } else {
                        (lc, w, y, x, la.max(lb))
                    };
                    let bu = self.bins(u, top);
                    let bv = self.bins(v, top);
                    let br = self.bins(rest, lo);
                    let mut s = 0.0;
                    for p in 0..bu.len() {
                        if bu[p] == 0.0 || bv[p] == 0.0 {
                            continue;
                        }
                        let q = p >> (self.dim * (top - lo) as usize);
                        let den = self.w_up(la, top, p) * self.w_up(lb, top, p) * self.w_up(lc, top, p);
                        s += bu[p] * bv[p] * br[q] / den;
                    }
                    parts.push(coef * s);
                }
            }
        }
        cells::pairwise_sum(&parts)
    }

    fn triple_edge(
        &self,
        a: &LevelCombo,
        b: &LevelCombo,
        c: &LevelCombo,
        x: &[f64],
        y: &[f64],
    ) -> f64 {
        let mut parts = Vec::new();
        for &(la, ca) in &a.terms {
            for &(lb, cb) in &b.terms {
                for &(lc, cc) in &c.terms {
                    let m = la.max(lb).max(lc);
                    let bx = self.bins(x, m);
                    let by = self.bins(y, m);
                    let mut s = 0.0;
                    for p in 0..bx.len() {
                        if bx[p] == 0.0 || by[p] == 0.0 {
                            continue;
                        }
                        let den = self.w_up(la, m, p) * self.w_up(lb, m, p) * self.w_up(lc, m, p);
                        s += bx[p] * by[p] / den;
                    }
                    parts.push(ca * cb * cc * s);
                }
            }
        }
        cells::pairwise_sum(&parts)
    }
}
