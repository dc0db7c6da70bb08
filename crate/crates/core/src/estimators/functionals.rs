use alloc::vec::Vec;

use crate::cells::{pairwise_sum, CellFunction};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::projection::WeightedProjection;

fn check_unweighted(proj: &WeightedProjection) -> Result<()> {
    let w = proj.weight();
    if w.min() != 1.0 || w.max() != 1.0 {
        return Err(Error::InvalidParameter("projection must be unweighted"));
    }
    Ok(())
}

/// `P_n Π(x, ·) + ((I - Π) p̂)(x)`.
pub fn density_point_estimate(
    sample: &[&[f64]],
    x: &[f64],
    proj: &WeightedProjection,
    p_hat: &CellFunction,
) -> Result<f64> {
    check_unweighted(proj)?;
    if sample.is_empty() {
        return Err(Error::EmptySubsample("density sample"));
    }
    let vals = sample
        .iter()
        .map(|z| proj.kernel(x, z))
        .collect::<Result<Vec<_>>>()?;
    let mean = pairwise_sum(&vals) / sample.len() as f64;
    let residual = p_hat.eval(x)? - proj.project(p_hat)?.function.eval(x)?;
    Ok(mean + residual)
}

/// `U_n Π`, the average of `Π(x_i, x_j)` over ordered pairs `i ≠ j`.
pub fn quadratic_estimate(sample: &[&[f64]], proj: &WeightedProjection) -> Result<f64> {
    check_unweighted(proj)?;
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: n });
    }
    let (all, diag) = proj.sample_sums(sample)?;
    Ok((all - diag) / (n as f64 * (n as f64 - 1.0)))
}

/// Exact variance of [`quadratic_estimate`] for a sample of size `n` from `p`:
/// `4(n-2)/(n(n-1)) ζ_1 + 2/(n(n-1)) ζ_2` with `ζ_1 = Var Πp(X)` and
/// `ζ_2 = Var Π(X_1, X_2)`. The prefix projection must be unweighted and `p > 0`.
pub fn quadratic_variance(proj: &WeightedProjection, p: &CellFunction, n: usize) -> Result<f64> {
    check_unweighted(proj)?;
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: n });
    }
    if proj.indices() != proj.span() {
        return Err(Error::InvalidParameter("variance needs a prefix projection"));
    }
    let rule = proj.quadrature();
    let rule = if p.level() > rule.level() {
        crate::basis::QuadratureRule::new(p.dim(), p.level())?
    } else {
        rule
    };
    let weighted = WeightedProjection::build(proj.basis(), proj.span(), p, &rule)?;
    // E Π(X1, X2)^2 = tr((C⁻¹ M)^2) with M the p-weighted Gram
    let cinv = proj.cholesky().inverse();
    let cm: Matrix = cinv.matmul(weighted.gram());
    let second = cm.matmul(&cm).trace();
    let pp = proj.project(p)?.function;
    let mean = pp.inner(p)?;
    let sq = pp.mul(&pp)?.inner(p)?;
    let zeta1 = sq - mean * mean;
    let zeta2 = second - mean * mean;
    let nf = n as f64;
    Ok(4.0 * (nf - 2.0) / (nf * (nf - 1.0)) * zeta1 + 2.0 / (nf * (nf - 1.0)) * zeta2)
}
