//! Matrix-chain kernels and their U-statistics by set-partition inversion.
//!
//! A chain of order `m` assigns to distinct observations `i_1, ..., i_m`
//!
//! `ℓ(i_1) κ_1(i_1, i_2) [μ(i_2) ⊗ - H] κ_2(i_2, i_3) ... κ_{m-1}(i_{m-1}, i_m) ρ(i_m)`
//!
//! where each middle factor is either `μ(i) e_i e_iᵀ` alone or, for a centered
//! chain, `μ(i) e_i e_iᵀ - H`. Expanding the centering turns the chain into a
//! signed sum of plain paths over subsets of the middle positions; collapsed
//! positions compose their neighbouring links through `H`. A plain path only
//! depends on its own positions, so its order-`m` U-statistic equals its
//! order-`q` U-statistic, and sums over distinct tuples follow from
//! unrestricted sums by Möbius inversion on the partition lattice.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ustat::falling;

/// Backend providing the link algebra over a fixed sample.
///
/// `κ(i, j)` denotes the value of a link between observations `i` and `j`.
pub trait LinkSystem {
    type Link: Clone;

    /// Number of observations.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn entry(&self, link: &Self::Link, i: usize, j: usize) -> f64;

    /// The link `κ_a H κ_b`.
    fn compose(&self, a: &Self::Link, b: &Self::Link) -> Self::Link;

    /// `κ(i, i)`.
    fn diag(&self, link: &Self::Link) -> Vec<f64>;

    /// `Σ_j κ(i, j) x_j`.
    fn apply(&self, link: &Self::Link, x: &[f64]) -> Vec<f64>;

    /// `Σ_i x_i κ(i, j)`.
    fn apply_t(&self, link: &Self::Link, x: &[f64]) -> Vec<f64>;

    /// `Σ_j κ_a(i, j) x_j κ_b(j, i)`.
    fn sandwich(&self, a: &Self::Link, x: &[f64], b: &Self::Link) -> Vec<f64>;

    /// `Σ_{i,j,l} w_i κ_a(i, j) x_j κ_b(j, l) y_l κ_c(l, i)`.
    fn cycle3(
        &self,
        a: &Self::Link,
        b: &Self::Link,
        c: &Self::Link,
        w: &[f64],
        x: &[f64],
        y: &[f64],
    ) -> f64;

    /// `Σ_{i,j} x_i y_j κ_a(i, j) κ_b(j, i) κ_c(i, j)`.
    fn triple_edge(
        &self,
        a: &Self::Link,
        b: &Self::Link,
        c: &Self::Link,
        x: &[f64],
        y: &[f64],
    ) -> f64;
}

/// Chain kernel of order `links.len() + 1`.
#[derive(Debug, Clone)]
pub struct ChainKernel<L> {
    pub left: Vec<f64>,
    pub middle: Vec<f64>,
    pub right: Vec<f64>,
    pub links: Vec<L>,
    pub centered: bool,
}

/// One signed plain path from the expansion of a chain.
#[derive(Debug, Clone)]
pub struct Path<'a, L> {
    pub sign: f64,
    /// Chain positions carried by the path, first and last included.
    pub positions: Vec<usize>,
    pub weights: Vec<&'a [f64]>,
    pub links: Vec<L>,
}

impl<L: Clone> ChainKernel<L> {
    pub fn order(&self) -> usize {
        self.links.len() + 1
    }

    /// Signed plain paths whose sum is the chain.
    pub fn expand<S: LinkSystem<Link = L>>(&self, sys: &S) -> Vec<Path<'_, L>> {
        let m = self.order();
        let inner = m.saturating_sub(2);
        let mut out = Vec::new();
        for mask in 0..(1usize << inner) {
            let kept = mask.count_ones() as usize;
            if !self.centered && kept != inner {
                continue;
            }
            let mut positions = Vec::with_capacity(kept + 2);
            let mut weights: Vec<&[f64]> = Vec::with_capacity(kept + 2);
            let mut links = Vec::with_capacity(kept + 1);
            positions.push(0);
            weights.push(&self.left);
            let mut cur = self.links[0].clone();
            for p in 0..inner {
                if mask >> p & 1 == 1 {
                    positions.push(p + 1);
                    weights.push(&self.middle);
                    links.push(cur);
                    cur = self.links[p + 1].clone();
                } else {
                    cur = sys.compose(&cur, &self.links[p + 1]);
                }
            }
            links.push(cur);
            positions.push(m - 1);
            weights.push(&self.right);
            let sign = if (inner - kept) % 2 == 0 { 1.0 } else { -1.0 };
            out.push(Path {
                sign,
                positions,
                weights,
                links,
            });
        }
        out
    }

    /// Chain value at the observation tuple `idx` (one observation per position).
    pub fn value_at<S: LinkSystem<Link = L>>(&self, sys: &S, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order());
        let mut total = 0.0;
        for path in self.expand(sys) {
            let obs: Vec<usize> = path.positions.iter().map(|&p| idx[p]).collect();
            let mut v = path.weights[0][obs[0]];
            for (t, link) in path.links.iter().enumerate() {
                v *= sys.entry(link, obs[t], obs[t + 1]) * path.weights[t + 1][obs[t + 1]];
            }
            total += path.sign * v;
        }
        total
    }
}

/// U-statistic of a chain kernel over the systems' sample.
pub fn ustat_chain<S: LinkSystem>(sys: &S, chain: &ChainKernel<S::Link>) -> Result<f64> {
    let m = chain.order();
    if !(2..=4).contains(&m) {
        return Err(Error::UnsupportedOrder(m));
    }
    let n = sys.len();
    if n < m {
        return Err(Error::SampleTooSmall { needed: m, found: n });
    }
    for v in [&chain.left, &chain.middle, &chain.right] {
        if v.len() != n {
            return Err(Error::ShapeMismatch("chain score length"));
        }
    }
    let mut total = 0.0;
    for path in chain.expand(sys) {
        total += path.sign * path_ustat(sys, &path.weights, &path.links)?;
    }
    Ok(total)
}

fn had(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn had3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::cells::pairwise_sum(&had(a, b))
}

/// U-statistic of the plain path `x_1 κ_1 x_2 κ_2 ... x_q` with `q = weights.len()`.
pub fn path_ustat<S: LinkSystem>(sys: &S, weights: &[&[f64]], links: &[S::Link]) -> Result<f64> {
    let q = weights.len();
    if links.len() + 1 != q {
        return Err(Error::ShapeMismatch("path links"));
    }
    let n = sys.len();
    if n < q {
        return Err(Error::SampleTooSmall { needed: q, found: n });
    }
    let distinct = match q {
        2 => path2(sys, weights, links),
        3 => path3(sys, weights, links),
        4 => path4(sys, weights, links),
        _ => return Err(Error::UnsupportedOrder(q)),
    };
    Ok(distinct / falling(n, q))
}

fn path2<S: LinkSystem>(sys: &S, x: &[&[f64]], k: &[S::Link]) -> f64 {
    let d1 = sys.diag(&k[0]);
    let all = dot(x[0], &sys.apply(&k[0], x[1]));
    let tied = dot(&had(x[0], &d1), x[1]);
    all - tied
}

fn path3<S: LinkSystem>(sys: &S, x: &[&[f64]], k: &[S::Link]) -> f64 {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let d1 = sys.diag(&k[0]);
    let d2 = sys.diag(&k[1]);
    let a = sys.apply(&k[1], x3);
    let s_free = dot(x1, &sys.apply(&k[0], &had(x2, &a)));
    let s_12 = dot(&had3(x1, &d1, x2), &a);
    let s_23 = dot(x1, &sys.apply(&k[0], &had3(x2, &d2, x3)));
    let s_13 = dot(&had(x1, x3), &sys.sandwich(&k[0], x2, &k[1]));
    let s_123 = dot(&had3(x1, x2, x3), &had(&d1, &d2));
    s_free - s_12 - s_23 - s_13 + 2.0 * s_123
}

fn path4<S: LinkSystem>(sys: &S, x: &[&[f64]], k: &[S::Link]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let (k1, k2, k3) = (&k[0], &k[1], &k[2]);
    let d1 = sys.diag(k1);
    let d2 = sys.diag(k2);
    let d3 = sys.diag(k3);
    let v3 = sys.apply(k3, x4);
    let v2 = sys.apply(k2, &had(x3, &v3));
    let x34d3 = had3(x3, x4, &d3);
    let x23d2 = had3(x2, x3, &d2);

    let p1 = dot(x1, &sys.apply(k1, &had(x2, &v2)));
    let p12 = dot(&had3(x1, x2, &d1), &v2);
    let p23 = dot(x1, &sys.apply(k1, &had(&x23d2, &v3)));
    let p34 = dot(x1, &sys.apply(k1, &had(x2, &sys.apply(k2, &x34d3))));
    let sand12 = sys.sandwich(k1, x2, k2);
    let sand23 = sys.sandwich(k2, x3, k3);
    let p13 = dot(&had3(x1, x3, &sand12), &v3);
    let p14 = sys.cycle3(k1, k2, k3, &had(x1, x4), x2, x3);
    let p24 = dot(&had3(x2, x4, &sys.apply_t(k1, x1)), &sand23);

    let p12_34 = dot(&had3(x1, x2, &d1), &sys.apply(k2, &x34d3));
    let p13_24 = sys.triple_edge(k1, k2, k3, &had(x1, x3), &had(x2, x4));
    let p14_23 = dot(&had(x1, x4), &sys.sandwich(k1, &x23d2, k3));

    let p123 = dot(&had3(x1, x2, x3), &had3(&d1, &d2, &v3));
    let p124 = dot(&had3(x1, x2, x4), &had(&d1, &sand23));
    let p134 = dot(&had3(x1, x3, x4), &had(&d3, &sand12));
    let p234 = dot(x1, &sys.apply(k1, &had(&x23d2, &had(x4, &d3))));

    let p1234 = dot(&had(&had(x1, x2), &had(x3, x4)), &had3(&d1, &d2, &d3));

    p1 - (p12 + p23 + p34 + p13 + p14 + p24)
        + (p12_34 + p13_24 + p14_23)
        + 2.0 * (p123 + p124 + p134 + p234)
        - 6.0 * p1234
}
