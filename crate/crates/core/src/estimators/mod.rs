//! Influence-function estimators of the mean response `∫ a b g dν`, with
//! oracles for their conditional bias, and two cross-check functionals.
//!
//! The order-`m` estimator is
//!
//! `P_n[Aâ(Y - b̂) + b̂] + Σ_{j=2}^m (-1)^{j-1} U_n[Ã_1 Π Ā_2 Π ... Ā_{j-1} Π Ỹ_j]`
//!
//! where every middle factor is centered by the Gram weight `ā b̄ ĝ` (or
//! `ā b̄ g` when the density is treated as known), which makes each kernel
//! degenerate. All kernels are evaluated at the preliminary fit.

mod functionals;
mod links;
mod oracle;

pub use functionals::{density_point_estimate, quadratic_estimate, quadratic_variance};
pub use links::{full_chains, hyperbolic_pairs, truncated_chains, ChainLinks, PrefixCombo};
pub use oracle::{bias_oracle, exact_bias, BiasBreakdown, BiasComponents};

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::basis::{prefix_level, prefix_size, Basis, DyadicGrid, QuadratureRule};
use crate::cells::{self, pairwise_sum, CellFunction};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mar::{score_triple, Observation, ScoreTriple, PreliminaryFit, Weights};
use crate::projection::WeightedProjection;
use crate::ustat::{ustat_chain, CellSystem, ChainKernel, DenseSystem, LevelCombo, LevelMasses};

/// Highest order with closed-form kernels.
pub const MAX_ORDER: usize = 4;

/// Density in the Gram weight `ā b̄ h`.
#[derive(Debug, Clone, PartialEq)]
pub enum GramDensity {
    /// `h = ĝ`.
    Estimated,
    /// `h = g`, supplied by the caller.
    Known(CellFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    Full,
    /// Orders `j >= 3` keep block pairs `(r, s)` with `r + s <= cutoff`, `r = 0` or `s = 0`.
    Hyperbolic { grid: DyadicGrid, cutoff: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub order: usize,
    /// Projection dimension; `0` drops every term of order `j >= 2`.
    pub k: usize,
    pub truncation: Truncation,
    pub weights: Weights,
    pub gram: GramDensity,
}

impl EstimatorConfig {
    /// Full kernels, unit weights, estimated density.
    pub fn new(dim: usize, order: usize, k: usize) -> Self {
        Self {
            order,
            k,
            truncation: Truncation::Full,
            weights: Weights::unit(dim),
            gram: GramDensity::Estimated,
        }
    }

    pub fn truncated(mut self, grid: DyadicGrid, cutoff: usize) -> Self {
        self.truncation = Truncation::Hyperbolic { grid, cutoff };
        self
    }

    pub fn known_density(mut self, g: CellFunction) -> Self {
        self.gram = GramDensity::Known(g);
        self
    }

    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.order) {
            return Err(Error::UnsupportedOrder(self.order));
        }
        if self.weights.a_bar.dim() != dim || self.weights.b_bar.dim() != dim {
            return Err(Error::ShapeMismatch("weight dimension"));
        }
        if !(self.weights.a_bar.min() > 0.0 && self.weights.b_bar.min() > 0.0) {
            return Err(Error::InvalidParameter("weights must be positive"));
        }
        if let GramDensity::Known(g) = &self.gram {
            if g.dim() != dim {
                return Err(Error::ShapeMismatch("known density dimension"));
            }
        }
        if let Truncation::Hyperbolic { grid, .. } = &self.truncation {
            if self.order < 3 {
                return Err(Error::InvalidParameter("truncation needs order at least 3"));
            }
            if grid.dim != dim {
                return Err(Error::ShapeMismatch("grid dimension"));
            }
            if grid.k != self.k {
                return Err(Error::GridMismatch);
            }
        }
        Ok(())
    }

    /// Chains for each order `j = 2..=order` (index `j - 2`).
    pub fn chains(&self) -> Vec<Vec<ChainLinks>> {
        (2..=self.order)
            .map(|j| {
                if self.k == 0 {
                    return Vec::new();
                }
                match &self.truncation {
                    Truncation::Hyperbolic { grid, cutoff } if j >= 3 => {
                        truncated_chains(j, grid, *cutoff)
                    }
                    _ => full_chains(j, self.k),
                }
            })
            .collect()
    }
}

/// An estimate and its additive decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    /// `P_n[Aâ(Y - b̂) + b̂]`.
    pub linear: f64,
    /// Terms of orders `2..=m`, signs included.
    pub terms: Vec<f64>,
    pub n: usize,
}

impl EstimateReport {
    fn assemble(linear: f64, terms: Vec<f64>, n: usize) -> Self {
        let value = terms.iter().fold(linear, |acc, t| acc + t);
        Self {
            value,
            linear,
            terms,
            n,
        }
    }

    /// Term of order `j`; order 1 is the linear term.
    pub fn term(&self, j: usize) -> Option<f64> {
        match j {
            0 => None,
            1 => Some(self.linear),
            _ => self.terms.get(j - 2).copied(),
        }
    }

    /// Componentwise average of two half-sample reports with equal orders.
    pub fn average(&self, other: &Self) -> Result<Self> {
        if self.terms.len() != other.terms.len() {
            return Err(Error::ShapeMismatch("report orders differ"));
        }
        let terms = self
            .terms
            .iter()
            .zip(&other.terms)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Ok(Self::assemble(
            0.5 * (self.linear + other.linear),
            terms,
            self.n + other.n,
        ))
    }
}

#[derive(Debug, Clone)]
enum Backend {
    None,
    Cells {
        level: u32,
        masses: Arc<LevelMasses>,
        chains: Vec<Vec<Vec<LevelCombo>>>,
    },
    Dense {
        basis: Basis,
        size: usize,
        h: Matrix,
        chains: Vec<Vec<Vec<Matrix>>>,
    },
}

/// An estimator bound to a preliminary fit, reusable across samples.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    fit: PreliminaryFit,
    dim: usize,
    gram_weight: CellFunction,
    chains: Vec<Vec<ChainLinks>>,
    projections: BTreeMap<usize, WeightedProjection>,
    backend: Backend,
}

fn sizes(chains: &[Vec<ChainLinks>]) -> Vec<usize> {
    let mut out: Vec<usize> = chains
        .iter()
        .flatten()
        .flatten()
        .flat_map(|c| c.terms().iter().map(|p| p.0))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl Estimator {
    pub fn new(fit: &PreliminaryFit, config: &EstimatorConfig) -> Result<Self> {
        let dim = fit.a_hat.dim();
        config.validate(dim)?;
        let density = match &config.gram {
            GramDensity::Estimated => &fit.g_hat,
            GramDensity::Known(g) => g,
        };
        let gram_weight = config.weights.gram_weight(density)?;
        let chains = config.chains();
        let used = sizes(&chains);
        let mut projections = BTreeMap::new();
        let backend = match used.last() {
            None => Backend::None,
            Some(&top) => {
                let levels: Option<Vec<u32>> = used.iter().map(|&s| prefix_level(dim, s)).collect();
                match levels {
                    Some(levels) => {
                        let level = *levels.last().expect("non-empty");
                        let masses = Arc::new(LevelMasses::new(&gram_weight, level)?);
                        let to_cells = |c: &PrefixCombo| {
                            LevelCombo::new(c.terms().iter().map(|&(s, v)| {
                                (prefix_level(dim, s).expect("checked admissible"), v)
                            }))
                        };
                        let chains = chains
                            .iter()
                            .map(|cs| cs.iter().map(|l| l.iter().map(to_cells).collect()).collect())
                            .collect();
                        Backend::Cells {
                            level,
                            masses,
                            chains,
                        }
                    }
                    None => {
                        let mut level = 0;
                        while prefix_size(dim, level) < top {
                            level += 1;
                        }
                        let basis = Basis::new(dim, level)?;
                        let rule = QuadratureRule::new(dim, level.max(gram_weight.level()))?;
                        let mut inverses = BTreeMap::new();
                        for &s in &used {
                            let p = WeightedProjection::prefix(&basis, s, &gram_weight, &rule)?;
                            inverses.insert(s, p.cholesky().inverse().padded(top));
                            projections.insert(s, p);
                        }
                        let h = projections[&top].gram().clone();
                        let to_matrix = |c: &PrefixCombo| {
                            let mut m = Matrix::zeros(top, top);
                            for &(s, v) in c.terms() {
                                m = m.add(&inverses[&s].scale(v));
                            }
                            m
                        };
                        let chains = chains
                            .iter()
                            .map(|cs| cs.iter().map(|l| l.iter().map(to_matrix).collect()).collect())
                            .collect();
                        Backend::Dense {
                            basis,
                            size: top,
                            h,
                            chains,
                        }
                    }
                }
            }
        };
        Ok(Self {
            config: config.clone(),
            fit: fit.clone(),
            dim,
            gram_weight,
            chains,
            projections,
            backend,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn fit(&self) -> &PreliminaryFit {
        &self.fit
    }

    /// `ā b̄ ĝ`, or `ā b̄ g` for a known density.
    pub fn gram_weight(&self) -> &CellFunction {
        &self.gram_weight
    }

    /// Chains per order `j >= 2`, as prefix combinations.
    pub fn chains(&self) -> &[Vec<ChainLinks>] {
        &self.chains
    }

    /// `∫ κ(·, z) h(z) dν(z)` for a link `κ` given as a prefix combination.
    pub fn apply_link(&self, combo: &PrefixCombo, h: &CellFunction) -> Result<CellFunction> {
        let mut out = CellFunction::constant(self.dim, 0, 0.0)?;
        for &(s, c) in combo.terms() {
            let part = match prefix_level(self.dim, s) {
                Some(l) => {
                    let num = h.cell_masses(l)?;
                    let den = self.gram_weight.cell_masses(l)?;
                    let v = num.iter().zip(&den).map(|(a, b)| a / b).collect();
                    CellFunction::new(self.dim, l, v)?
                }
                None => {
                    let p = self
                        .projections
                        .get(&s)
                        .ok_or(Error::ShapeMismatch("link size unknown to the estimator"))?;
                    p.project(&h.div(&self.gram_weight)?)?.function
                }
            };
            out = out.add(&part.scale(c))?;
        }
        Ok(out)
    }

    pub fn estimate(&self, sample: &[Observation]) -> Result<EstimateReport> {
        let n = sample.len();
        if n == 0 {
            return Err(Error::EmptySubsample("estimation sample"));
        }
        let m = self.config.order;
        if m >= 2 && self.config.k > 0 && n < m {
            return Err(Error::SampleTooSmall { needed: m, found: n });
        }
        let s = score_triple(sample, self.dim, &self.fit, &self.config.weights)?;
        let linear = pairwise_sum(&s.first_order) / n as f64;
        let sign = |j: usize| if j % 2 == 0 { -1.0 } else { 1.0 };
        let mut terms = Vec::with_capacity(m.saturating_sub(1));
        match &self.backend {
            Backend::None => terms.resize(m.saturating_sub(1), 0.0),
            Backend::Cells { level, masses, chains } => {
                let cells = sample
                    .iter()
                    .map(|o| cells::cell_of(o.point(self.dim), self.dim, *level))
                    .collect::<Result<Vec<_>>>()?;
                let sys = CellSystem::with_masses(*level, cells, masses.clone())?;
                for (idx, per_order) in chains.iter().enumerate() {
                    let mut parts = Vec::with_capacity(per_order.len());
                    for links in per_order {
                        parts.push(ustat_chain(&sys, &chain_of(&s, links.clone()))?);
                    }
                    terms.push(sign(idx + 2) * pairwise_sum(&parts));
                }
            }
            Backend::Dense {
                basis,
                size,
                h,
                chains,
            } => {
                let mut data = Vec::with_capacity(n * size);
                for o in sample {
                    data.extend(basis.values_at(o.point(self.dim), *size)?);
                }
                let sys = DenseSystem::new(Matrix::from_rows(n, *size, data)?, h.clone())?;
                for (idx, per_order) in chains.iter().enumerate() {
                    let mut parts = Vec::with_capacity(per_order.len());
                    for links in per_order {
                        parts.push(ustat_chain(&sys, &chain_of(&s, links.clone()))?);
                    }
                    terms.push(sign(idx + 2) * pairwise_sum(&parts));
                }
            }
        }
        Ok(EstimateReport::assemble(linear, terms, n))
    }
}

fn chain_of<L>(s: &ScoreTriple, links: Vec<L>) -> ChainKernel<L> {
    ChainKernel {
        left: s.a_tilde.clone(),
        middle: s.a_bar.clone(),
        right: s.y_tilde.clone(),
        links,
        centered: true,
    }
}

/// One-shot estimate.
pub fn estimate(
    sample: &[Observation],
    fit: &PreliminaryFit,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    Estimator::new(fit, config)?.estimate(sample)
}
