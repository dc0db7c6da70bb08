use alloc::vec::Vec;

use crate::basis::{prefix_level, prefix_size, Basis, DyadicGrid, QuadratureRule};
use crate::cells::CellFunction;
use crate::error::Result;
use crate::estimators::Estimator;
use crate::mar::{PreliminaryFit, TripletModel, Weights};
use crate::projection::WeightedProjection;

/// Exact conditional bias of an estimator given its fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasBreakdown {
    /// `∫(â - a)(b - b̂) g dν`.
    pub first_order: f64,
    /// Expected terms of orders `2..=m`.
    pub terms: Vec<f64>,
    pub total: f64,
}

/// Computable pieces of the bias bounds, with norms in `L2(ā b̄ g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasComponents {
    /// `-∫(â - a)(b̂ - b) g dν`.
    pub first_order: f64,
    /// `-∫ ā b̄ g (I - Π)[(â - a)/ā] (I - Π)[(b̂ - b)/b̄] dν` for the prefix of size `k`.
    pub projection_remainder: f64,
    /// `Σ_{r=1}^R ‖(I - Π̂^(0,k_{r-1}]) (â-a)/ā‖ ‖(I - Π̂^(0,l_{D-r}]) (b̂-b)/b̄‖ ‖ĝ/g - 1‖_∞`.
    pub hyperbola_bound: Option<f64>,
    /// `‖ĝ/g - 1‖_∞`.
    pub density_error: f64,
}

/// `Π^(0, size]` in `L2(w)` applied to `f`; resolution prefixes use weighted cell averages.
pub(crate) fn prefix_project(size: usize, f: &CellFunction, w: &CellFunction) -> Result<CellFunction> {
    let dim = f.dim();
    if size == 0 {
        return f.scale(0.0).coarsen(0);
    }
    if let Some(l) = prefix_level(dim, size) {
        let num = f.mul(w)?.cell_masses(l)?;
        let den = w.cell_masses(l)?;
        let v = num.iter().zip(&den).map(|(a, b)| a / b).collect();
        return CellFunction::new(dim, l, v);
    }
    let mut level = 0;
    while prefix_size(dim, level) < size {
        level += 1;
    }
    let basis = Basis::new(dim, level)?;
    let rule = QuadratureRule::new(dim, level.max(w.level()).max(f.level()))?;
    let p = WeightedProjection::prefix(&basis, size, w, &rule)?;
    Ok(p.project(f)?.function)
}

fn weighted_norm(f: &CellFunction, w: &CellFunction) -> Result<f64> {
    Ok(libm::sqrt(f.mul(f)?.inner(w)?))
}

/// Conditional expectation of `est`'s estimate minus the truth, by exact integration.
pub fn exact_bias(est: &Estimator, model: &TripletModel) -> Result<BiasBreakdown> {
    let fit = est.fit();
    let w = &est.config().weights;
    let g = model.g();
    let u = fit.a_hat.sub(&model.a)?.mul(&w.b_bar)?.mul(&g)?;
    let v = model.b.sub(&fit.b_hat)?.mul(&w.a_bar)?.mul(&g)?;
    let first_order = fit.a_hat.sub(&model.a)?.mul(&model.b.sub(&fit.b_hat)?)?.inner(&g)?;
    let middle = w.gram_weight(&g)?.sub(est.gram_weight())?;
    let mut terms = Vec::new();
    for (idx, chains) in est.chains().iter().enumerate() {
        let j = idx + 2;
        let mut sum = 0.0;
        for links in chains {
            let mut h = v.clone();
            for t in (0..links.len()).rev() {
                h = est.apply_link(&links[t], &h)?;
                if t > 0 {
                    h = middle.mul(&h)?;
                }
            }
            sum += u.inner(&h)?;
        }
        terms.push(if j % 2 == 0 { -sum } else { sum });
    }
    let total = terms.iter().fold(first_order, |acc, t| acc + t);
    Ok(BiasBreakdown {
        first_order,
        terms,
        total,
    })
}

/// The bias pieces for projection dimension `k` and, optionally, a hyperbolic truncation.
pub fn bias_oracle(
    model: &TripletModel,
    fit: &PreliminaryFit,
    weights: &Weights,
    k: usize,
    truncation: Option<(&DyadicGrid, usize)>,
) -> Result<BiasComponents> {
    let g = model.g();
    let da = fit.a_hat.sub(&model.a)?;
    let db = fit.b_hat.sub(&model.b)?;
    let first_order = -da.mul(&db)?.inner(&g)?;
    let w = weights.gram_weight(&g)?;
    let ea = da.div(&weights.a_bar)?;
    let eb = db.div(&weights.b_bar)?;
    let ra = ea.sub(&prefix_project(k, &ea, &w)?)?;
    let rb = eb.sub(&prefix_project(k, &eb, &w)?)?;
    let projection_remainder = -ra.mul(&rb)?.inner(&w)?;
    let density_error = fit.g_hat.div(&g)?.map(|x| x - 1.0).sup_norm();
    let hyperbola_bound = match truncation {
        None => None,
        Some((grid, cutoff)) => {
            let w_hat = weights.gram_weight(&fit.g_hat)?;
            let mut total = 0.0;
            for r in 1..=grid.r_max() {
                let ka = grid.k_at(r as isize - 1);
                let lb = grid.l_at(cutoff as isize - r as isize);
                let na = weighted_norm(&ea.sub(&prefix_project(ka, &ea, &w_hat)?)?, &w)?;
                let nb = weighted_norm(&eb.sub(&prefix_project(lb, &eb, &w_hat)?)?, &w)?;
                total += na * nb * density_error;
            }
            Some(total)
        }
    };
    Ok(BiasComponents {
        first_order,
        projection_remainder,
        hyperbola_bound,
        density_error,
    })
}
