use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::DyadicGrid;

/// `Σ_t c_t Π^(0, size_t]`, sorted by size, without empty prefixes or zero coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrefixCombo {
    terms: Vec<(usize, f64)>,
}

impl PrefixCombo {
    pub fn new(terms: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut t: Vec<(usize, f64)> = terms.into_iter().filter(|p| p.0 > 0).collect();
        t.sort_by_key(|p| p.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (s, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == s => last.1 += c,
                _ => out.push((s, c)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        Self { terms: out }
    }

    pub fn single(size: usize) -> Self {
        Self::new([(size, 1.0)])
    }

    /// The block `Π^(lo, hi] = Π^(0, hi] - Π^(0, lo]`.
    pub fn block(lo: usize, hi: usize) -> Self {
        Self::new([(hi, 1.0), (lo, -1.0)])
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.terms.last().map_or(0, |p| p.0)
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self::new(self.terms.iter().chain(&other.terms).copied())
    }
}

/// Links of one centered chain.
pub type ChainLinks = Vec<PrefixCombo>;

/// Chains whose U-statistics add up to the order-`j` kernel term, before its sign.
pub fn full_chains(order: usize, k: usize) -> Vec<ChainLinks> {
    vec![vec![PrefixCombo::single(k); order - 1]]
}

/// The retained part of `Π Ā Π` at cutoff `D`, as pairs `(Σ_r Π^r, Π^(0, l_σ])`.
///
/// For `r >= 1` the retained `s` form the prefix `0..=σ(r)` with
/// `σ(r) = min(S, max(0, D - r))`, and `r = 0` keeps every `s`. Rows sharing
/// `σ` are merged, so with `D >= R + S` the blocks telescope to `Π^(0, k]`.
pub fn hyperbolic_pairs(grid: &DyadicGrid, cutoff: usize) -> Vec<(PrefixCombo, PrefixCombo)> {
    let r_max = grid.r_max();
    let s_max = grid.s_max();
    let mut groups: BTreeMap<usize, PrefixCombo> = BTreeMap::new();
    for r in 0..=r_max {
        let sigma = if r == 0 {
            s_max
        } else {
            s_max.min(cutoff.saturating_sub(r))
        };
        let block = PrefixCombo::block(grid.k_at(r as isize - 1), grid.k_at(r as isize));
        let entry = groups.entry(sigma).or_default();
        *entry = entry.plus(&block);
    }
    groups
        .into_iter()
        .rev()
        .filter(|(_, c)| !c.is_zero())
        .map(|(sigma, c)| (c, PrefixCombo::single(grid.l_at(sigma as isize))))
        .collect()
}

/// Truncated order-`j` chains (`j` in 3..=4): each contiguous pair of links is
/// cut at the hyperbola in turn while the remaining links stop at `k_0`.
pub fn truncated_chains(order: usize, grid: &DyadicGrid, cutoff: usize) -> Vec<ChainLinks> {
    let pairs = hyperbolic_pairs(grid, cutoff);
    let base = PrefixCombo::single(grid.k_at(0));
    let mut out = Vec::new();
    for i in 0..order - 2 {
        for (first, second) in &pairs {
            let mut links = vec![base.clone(); order - 1];
            links[i] = first.clone();
            links[i + 1] = second.clone();
            out.push(links);
        }
    }
    out
}
