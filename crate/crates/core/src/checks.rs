//! Exact identities behind the estimators, evaluated by quadrature, with
//! injectable defects to confirm that each check can fail.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::basis::{Basis, QuadratureRule};
use crate::cells::CellFunction;
use crate::error::Result;
use crate::mar::{
    tilde_project, ErrorDirections, ModelSpec, PreliminaryFit, SyntheticSpec, TripletModel, Weights,
};
use crate::projection::WeightedProjection;
use crate::rng::{self, ChaCha8Rng};
use crate::ustat::hoeffding::{DiscreteMeasure, TabulatedKernel};

/// A defect injected into the checked code paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    None,
    /// Flips the sign of the first-order corrections when forming a degenerate part.
    FlipDegenerateSign,
    /// Builds the projection of the collapse identity against `ā b̄ f` instead of `ā b̄ g`.
    WrongGramWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Worst absolute residual.
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn random_points(r: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| {
            let mut z = [0.0; 2];
            for v in z.iter_mut().take(dim) {
                *v = rng::uniform(r);
            }
            z
        })
        .collect()
}

fn random_weight(r: &mut ChaCha8Rng, dim: usize, level: u32, lo: f64, hi: f64) -> Result<CellFunction> {
    let count = crate::cells::cell_count(dim, level);
    let v = (0..count).map(|_| lo + (hi - lo) * rng::uniform(r)).collect();
    CellFunction::new(dim, level, v)
}

/// Idempotence `∫ Π(z1, z) Π(z, z2) w dν = Π(z1, z2)`, symmetry and `trace = k`
/// for random `(weight, prefix)` pairs, plus `Π(z, z) = 2^{Id}` for unweighted
/// resolution kernels.
pub fn projection_identities(seed: u64, pairs: usize) -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(seed, 100);
    let (mut idem, mut sym, mut trace) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..pairs {
        let dim = 1 + t % 2;
        let level = if dim == 1 { 5 } else { 3 };
        let basis = Basis::new(dim, level)?;
        let rule = QuadratureRule::for_basis(&basis);
        let w = random_weight(&mut r, dim, level, 0.2, 3.0)?;
        let k = 1 + rng::below(&mut r, basis.len());
        let p = WeightedProjection::prefix(&basis, k, &w, &rule)?;
        let pts = random_points(&mut r, dim, 4);
        for z1 in &pts {
            let s1 = p.section(&z1[..dim])?;
            for z2 in &pts {
                let s2 = p.section(&z2[..dim])?;
                let direct = p.kernel(&z1[..dim], &z2[..dim])?;
                idem = idem.max((s1.mul(&s2)?.inner(&w)? - direct).abs());
                sym = sym.max((direct - p.kernel(&z2[..dim], &z1[..dim])?).abs());
            }
        }
        trace = trace.max((p.trace()? - k as f64).abs());
    }
    let mut diag = 0.0f64;
    for (dim, level) in [(1usize, 4u32), (2, 3)] {
        let basis = Basis::new(dim, level)?;
        let rule = QuadratureRule::for_basis(&basis);
        let one = CellFunction::constant(dim, 0, 1.0)?;
        let p = WeightedProjection::prefix(&basis, basis.len(), &one, &rule)?;
        let want = libm::pow(2.0, (level as usize * dim) as f64);
        for z in random_points(&mut r, dim, 8) {
            diag = diag.max((p.kernel(&z[..dim], &z[..dim])? - want).abs());
        }
    }
    Ok(vec![
        CheckResult::new("projection idempotence", idem, 1e-9),
        CheckResult::new("projection symmetry", sym, 1e-9),
        CheckResult::new("projection trace", trace, 1e-9),
        CheckResult::new("resolution kernel diagonal", diag, 0.0),
    ])
}

/// Residuals of the three conditional-mean identities at the tilde parameters:
/// `∫ Π(z1, z)(ã - a) b̄ g = 0`, `∫ Π(z, z3) ā (b - b̃) g = 0` and
/// `∫ Π(z1, z) ā b̄ g Π(z, z3) = Π(z1, z3)`, for random models, fits and weights.
pub fn tilde_identities(seed: u64, models: usize, points: usize, mutation: Mutation) -> Result<[f64; 3]> {
    let mut r = rng::stream(seed, 200);
    let mut worst = [0.0f64; 3];
    for t in 0..models {
        let dim = 1 + t % 2;
        let (level, basis_level) = if dim == 1 { (7, 5) } else { (4, 3) };
        let model = TripletModel::synthesize(&ModelSpec {
            dim,
            level,
            alpha: 0.5 + rng::uniform(&mut r),
            beta: 0.5 + rng::uniform(&mut r),
            gamma_f: 1.0,
            eta: 0.1,
            seed: rng::mix(seed, t as u64),
        })?;
        let fit = PreliminaryFit::synthetic(
            &model,
            200,
            &SyntheticSpec {
                alpha: 0.5,
                beta: 0.5,
                gamma: 1.0,
                c_a: 1.0,
                c_b: 0.5,
                c_g: 0.5,
                seed: rng::mix(seed, 1000 + t as u64),
                directions: ErrorDirections::Independent,
            },
        )?;
        let weights = if t % 2 == 0 {
            Weights::unit(dim)
        } else {
            Weights {
                a_bar: random_weight(&mut r, dim, 2, 0.5, 2.0)?,
                b_bar: random_weight(&mut r, dim, 2, 0.5, 2.0)?,
            }
        };
        let basis = Basis::new(dim, basis_level)?;
        let rule = QuadratureRule::new(dim, level)?;
        let g = model.g();
        let w = weights.gram_weight(&g)?;
        let k = 1 + rng::below(&mut r, basis.len());
        let proj = WeightedProjection::prefix(&basis, k, &w, &rule)?;
        let (a_t, b_t) = tilde_project(&fit, &model, &proj, &weights)?;
        let collapse_proj = match mutation {
            Mutation::WrongGramWeight => {
                WeightedProjection::prefix(&basis, k, &weights.gram_weight(&model.f)?, &rule)?
            }
            _ => proj.clone(),
        };
        let left = a_t.sub(&model.a)?.mul(&weights.b_bar)?.mul(&g)?;
        let right = model.b.sub(&b_t)?.mul(&weights.a_bar)?.mul(&g)?;
        let pts = random_points(&mut r, dim, points);
        for z1 in &pts {
            let z1 = &z1[..dim];
            let s1 = proj.section(z1)?;
            worst[0] = worst[0].max(s1.inner(&left)?.abs());
            worst[1] = worst[1].max(s1.inner(&right)?.abs());
            let c1 = collapse_proj.section(z1)?;
            for z3 in &pts {
                let z3 = &z3[..dim];
                let c3 = collapse_proj.section(z3)?;
                let lhs = c1.mul(&c3)?.inner(&w)?;
                worst[2] = worst[2].max((lhs - collapse_proj.kernel(z1, z3)?).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest conditional mean of the degenerate part of random kernels of orders
/// 1 to 3 on 3-point spaces.
pub fn degeneracy(seed: u64, trials: usize, mutation: Mutation) -> Result<f64> {
    let mut r = rng::stream(seed, 300);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let order = 1 + t % 3;
        let raw: Vec<f64> = (0..3).map(|_| 0.1 + rng::uniform(&mut r)).collect();
        let total: f64 = raw.iter().sum();
        let measure = DiscreteMeasure::new(vec![0usize, 1, 2], raw.iter().map(|p| p / total).collect())?;
        let values = (0..3usize.pow(order as u32)).map(|_| 2.0 * rng::uniform(&mut r) - 1.0).collect();
        let kernel = TabulatedKernel::from_values(order, 3, values)?;
        let deg = kernel.degenerate_part_signed(&measure, mutation == Mutation::FlipDegenerateSign)?;
        worst = worst.max(deg.degeneracy_residual(&measure)?);
    }
    Ok(worst)
}

/// Every check with its pinned tolerance.
pub fn suite(seed: u64, mutation: Mutation) -> Result<Vec<CheckResult>> {
    let mut out = projection_identities(seed, 30)?;
    let lemma = tilde_identities(seed, 10, 16, mutation)?;
    for (i, v) in lemma.iter().enumerate() {
        let name = ["left tilde identity", "right tilde identity", "collapse identity"][i];
        out.push(CheckResult::new(name, *v, 1e-8));
    }
    out.push(CheckResult::new(
        "degenerate part",
        degeneracy(seed, 30, mutation)?,
        1e-12,
    ));
    out.push(truncated_degeneracy(seed)?);
    Ok(out)
}

/// The compensating term of every truncated link pair equals the conditional
/// mean of its leading term: `∫ κ_1(z1, z) w κ_2(z, z3) dν = (κ_1 H κ_2)(z1, z3)`.
pub fn truncated_degeneracy(seed: u64) -> Result<CheckResult> {
    use crate::basis::DyadicGrid;
    use crate::estimators::hyperbolic_pairs;
    use crate::ustat::{CellSystem, LevelCombo, LinkSystem};
    let mut r = rng::stream(seed, 400);
    let dim = 1;
    let level = 10;
    let w = random_weight(&mut r, dim, level, 0.3, 2.0)?;
    let grid = DyadicGrid::build(8, 1024, 1.0, 1.5, dim)?;
    let pts = random_points(&mut r, dim, 8);
    let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..dim]).collect();
    let sys = CellSystem::from_points(dim, level, &refs, &w)?;
    let to_cells = |c: &crate::estimators::PrefixCombo| {
        LevelCombo::new(
            c.terms()
                .iter()
                .map(|&(s, v)| (crate::basis::prefix_level(dim, s).expect("grid sizes are admissible"), v)),
        )
    };
    let mut worst = 0.0f64;
    for cutoff in 0..=grid.r_max() + grid.s_max() {
        for (first, second) in hyperbolic_pairs(&grid, cutoff) {
            let (l1, l2) = (to_cells(&first), to_cells(&second));
            let composed = sys.compose(&l1, &l2);
            for i in 0..refs.len() {
                let sec1 = link_section(&l1, refs[i], &w)?;
                for (j, z3) in refs.iter().enumerate() {
                    let sec2 = link_section(&l2, z3, &w)?;
                    let lhs = sec1.mul(&sec2)?.inner(&w)?;
                    worst = worst.max((lhs - sys.entry(&composed, i, j)).abs());
                }
            }
        }
    }
    Ok(CheckResult::new(
        format!("truncated kernel degeneracy ({} cutoffs)", grid.r_max() + grid.s_max() + 1),
        worst,
        1e-8,
    ))
}

/// `z ↦ κ(z0, z)` for a combination of resolution kernels.
fn link_section(link: &crate::ustat::LevelCombo, z0: &[f64], w: &CellFunction) -> Result<CellFunction> {
    let dim = w.dim();
    let mut out = CellFunction::constant(dim, w.level(), 0.0)?;
    for &(l, c) in link.terms() {
        let cell = crate::cells::cell_of(z0, dim, l)?;
        let mass = w.cell_masses(l)?[cell];
        let mut v = vec![0.0; crate::cells::cell_count(dim, l)];
        v[cell] = c / mass;
        out = out.add(&CellFunction::new(dim, l, v)?)?;
    }
    Ok(out)
}
