use alloc::vec::Vec;

use crate::cells::CellFunction;
use crate::error::{Error, Result};
use crate::mar::fit::PreliminaryFit;
use crate::mar::model::{Observation, TripletModel};
use crate::projection::WeightedProjection;

/// The weighting pair `(ā, b̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub a_bar: CellFunction,
    pub b_bar: CellFunction,
}

impl Weights {
    pub fn unit(dim: usize) -> Self {
        let one = CellFunction::constant(dim, 0, 1.0).expect("level 0 is valid");
        Self {
            a_bar: one.clone(),
            b_bar: one,
        }
    }

    /// `ā b̄ h`.
    pub fn gram_weight(&self, h: &CellFunction) -> Result<CellFunction> {
        self.a_bar.mul(&self.b_bar)?.mul(h)
    }
}

/// Per-observation variables `Ã = (Aâ - 1) b̄`, `Ỹ = A(Y - b̂) ā`, `Ā = A ā b̄`,
/// and the first-order summand `Aâ(Y - b̂) + b̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTriple {
    pub a_tilde: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub a_bar: Vec<f64>,
    pub first_order: Vec<f64>,
}

pub fn score_triple(
    obs: &[Observation],
    dim: usize,
    fit: &PreliminaryFit,
    weights: &Weights,
) -> Result<ScoreTriple> {
    let mut out = ScoreTriple {
        a_tilde: Vec::with_capacity(obs.len()),
        y_tilde: Vec::with_capacity(obs.len()),
        a_bar: Vec::with_capacity(obs.len()),
        first_order: Vec::with_capacity(obs.len()),
    };
    for o in obs {
        let z = o.point(dim);
        let ah = fit.a_hat.eval(z)?;
        let bh = fit.b_hat.eval(z)?;
        let ab = weights.a_bar.eval(z)?;
        let bb = weights.b_bar.eval(z)?;
        let a = o.a_f64();
        let y = o.ya_f64();
        out.a_tilde.push((a * ah - 1.0) * bb);
        out.y_tilde.push(a * (y - bh) * ab);
        out.a_bar.push(a * ab * bb);
        out.first_order.push(a * ah * (y - bh) + bh);
    }
    Ok(out)
}

/// `(ã, b̃)` with `(ã - â)/ā = Π[(a - â)/ā]` and `(b̃ - b̂)/b̄ = Π[(b - b̂)/b̄]`,
/// for `Π` weighted by `ā b̄ g`.
pub fn tilde_project(
    fit: &PreliminaryFit,
    model: &TripletModel,
    proj: &WeightedProjection,
    weights: &Weights,
) -> Result<(CellFunction, CellFunction)> {
    let w = weights.gram_weight(&model.g())?;
    let pw = proj.weight();
    if w.sub(pw)?.sup_norm() > 1e-12 * w.sup_norm() {
        return Err(Error::ShapeMismatch("projection weight is not ā b̄ g"));
    }
    let ea = model.a.sub(&fit.a_hat)?.div(&weights.a_bar)?;
    let eb = model.b.sub(&fit.b_hat)?.div(&weights.b_bar)?;
    let pa = proj.project(&ea)?.function;
    let pb = proj.project(&eb)?.function;
    let a_t = fit.a_hat.add(&weights.a_bar.mul(&pa)?)?;
    let b_t = fit.b_hat.add(&weights.b_bar.mul(&pb)?)?;
    Ok((a_t, b_t))
}
