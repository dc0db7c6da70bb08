use alloc::vec::Vec;

use rand_chacha::rand_core::RngCore;

use crate::cells::{self, CellFunction};
use crate::error::{Error, Result};
use crate::mar::holder::HolderFunction;
use crate::rng;
use crate::ustat::hoeffding::DiscreteMeasure;

/// Bounds implied by `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub f: (f64, f64),
    pub g: (f64, f64),
}

impl Bounds {
    pub fn new(eta: f64) -> Self {
        Self {
            a: (1.0 / (1.0 - eta), 1.0 / eta),
            b: (eta, 1.0 - eta),
            f: (eta, 1.0 / eta),
            g: (eta * eta, (1.0 - eta) / eta),
        }
    }
}

pub const CENTER_A: f64 = 2.0;
pub const CENTER_B: f64 = 0.5;
pub const CENTER_F: f64 = 1.0;

/// Inputs of [`TripletModel::synthesize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub dim: usize,
    pub level: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_f: f64,
    pub eta: f64,
    pub seed: u64,
}

/// The law of `(YA, A, Z)`: `Z ~ f`, `A | Z ~ Bern(1/a)`, `Y | Z ~ Bern(b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletModel {
    pub eta: f64,
    pub a: CellFunction,
    pub b: CellFunction,
    pub f: CellFunction,
    /// Affine scale applied to each raw series (1 when no clamping was needed).
    pub clamp_scales: [f64; 3],
}

/// Result of scaling `center + raw` into `[lo, hi]`.
pub(crate) fn affine_clamp(
    raw: &CellFunction,
    center: f64,
    lo: f64,
    hi: f64,
    what: &'static str,
) -> Result<(CellFunction, f64)> {
    let mut s: f64 = 1.0;
    for &v in raw.values() {
        if v > 0.0 {
            s = s.min((hi - center) / v);
        } else if v < 0.0 {
            s = s.min((lo - center) / v);
        }
    }
    if s < 1e-3 {
        return Err(Error::ClampCollapse(what));
    }
    let out = raw.map(|v| (center + s * v).clamp(lo, hi));
    Ok((out, s))
}

impl TripletModel {
    pub fn synthesize(spec: &ModelSpec) -> Result<Self> {
        if !(spec.eta > 0.05 && spec.eta < 0.4) {
            return Err(Error::InvalidParameter("eta must lie in (0.05, 0.4)"));
        }
        let bounds = Bounds::new(spec.eta);
        let series = |smooth: f64, tag: u64| -> Result<CellFunction> {
            HolderFunction::new(spec.dim, spec.level, smooth, rng::mix(spec.seed, tag))?.synthesize()
        };
        let (a, sa) = affine_clamp(&series(spec.alpha, 1)?, CENTER_A, bounds.a.0, bounds.a.1, "a")?;
        let (b, sb) = affine_clamp(&series(spec.beta, 2)?, CENTER_B, bounds.b.0, bounds.b.1, "b")?;
        let (f, sf) = affine_clamp(&series(spec.gamma_f, 3)?, CENTER_F, bounds.f.0, bounds.f.1, "f")?;
        let mass = f.integral();
        let f = f.scale(1.0 / mass);
        Self::new(spec.eta, a, b, f).map(|mut m| {
            m.clamp_scales = [sa, sb, sf];
            m
        })
    }

    /// Validates bounds and normalizes `f` to integrate to one.
    pub fn new(eta: f64, a: CellFunction, b: CellFunction, f: CellFunction) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::InvalidParameter("eta must lie in (0, 0.5)"));
        }
        if a.dim() != b.dim() || a.dim() != f.dim() {
            return Err(Error::ShapeMismatch("model component dimensions"));
        }
        let bounds = Bounds::new(eta);
        let tol = 1e-12;
        let check = |h: &CellFunction, (lo, hi): (f64, f64), what| {
            if h.min() < lo - tol || h.max() > hi + tol || !h.min().is_finite() {
                Err(Error::InvalidParameter(what))
            } else {
                Ok(())
            }
        };
        check(&a, bounds.a, "a outside its bounds")?;
        check(&b, bounds.b, "b outside its bounds")?;
        check(&f, bounds.f, "f outside its bounds")?;
        let mass = f.integral();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("f must integrate to one"));
        }
        Ok(Self {
            eta,
            a,
            b,
            f,
            clamp_scales: [1.0; 3],
        })
    }

    /// Model with `a = 2`, `b = 1/2`, `f = 1`.
    pub fn constant(dim: usize, level: u32, eta: f64) -> Result<Self> {
        Self::new(
            eta,
            CellFunction::constant(dim, level, CENTER_A)?,
            CellFunction::constant(dim, level, CENTER_B)?,
            CellFunction::constant(dim, level, CENTER_F)?,
        )
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// Finest level among the components.
    pub fn level(&self) -> u32 {
        self.a.level().max(self.b.level()).max(self.f.level())
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.eta)
    }

    /// `g = f / a`.
    pub fn g(&self) -> CellFunction {
        self.f.div(&self.a).expect("same dimension")
    }

    /// `χ = ∫ b f dν`.
    pub fn truth(&self) -> f64 {
        self.b.inner(&self.f).expect("same dimension")
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(self)
    }

    /// Law of one observation as atoms at the midpoints of the finest cells.
    pub fn observation_measure(&self) -> Result<DiscreteMeasure<Observation>> {
        let level = self.level();
        let dim = self.dim();
        let f = self.f.refine(level)?;
        let a = self.a.refine(level)?;
        let b = self.b.refine(level)?;
        let vol = f.cell_volume();
        let mut atoms = Vec::new();
        let mut probs = Vec::new();
        for c in 0..f.len() {
            let z = cells::cell_midpoint(c, dim, level);
            let pz = f.values()[c] * vol;
            let pa = 1.0 / a.values()[c];
            let pb = b.values()[c];
            for (ai, yi, p) in [
                (false, false, 1.0 - pa),
                (true, false, pa * (1.0 - pb)),
                (true, true, pa * pb),
            ] {
                atoms.push(Observation { z, a: ai, y: yi });
                probs.push(pz * p);
            }
        }
        // absorb rounding so the masses sum to one
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        DiscreteMeasure::new(atoms, probs)
    }
}

/// One observation `(YA, A, Z)`; `y` is false whenever `a` is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub z: [f64; 2],
    pub a: bool,
    pub y: bool,
}

impl Observation {
    pub fn new(z: &[f64], a: bool, y: bool) -> Result<Self> {
        if z.is_empty() || z.len() > 2 {
            return Err(Error::UnsupportedDimension(z.len()));
        }
        if z.iter().any(|x| !(0.0..1.0).contains(x)) {
            return Err(Error::PointOutsideDomain);
        }
        let mut p = [0.0; 2];
        p[..z.len()].copy_from_slice(z);
        Ok(Self { z: p, a, y: y && a })
    }

    #[inline]
    pub fn point(&self, dim: usize) -> &[f64] {
        &self.z[..dim]
    }

    #[inline]
    pub fn a_f64(&self) -> f64 {
        if self.a {
            1.0
        } else {
            0.0
        }
    }

    /// The observed product `YA`.
    #[inline]
    pub fn ya_f64(&self) -> f64 {
        if self.a && self.y {
            1.0
        } else {
            0.0
        }
    }
}

/// Exact sampler: cell by inverse CDF of `f · vol`, uniform within the cell.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    level: u32,
    cdf: Vec<f64>,
    a: CellFunction,
    b: CellFunction,
}

impl Sampler {
    fn new(model: &TripletModel) -> Result<Self> {
        let level = model.level();
        let f = model.f.refine(level)?;
        let vol = f.cell_volume();
        let mut cdf = Vec::with_capacity(f.len());
        let mut acc = 0.0;
        for &v in f.values() {
            acc += v * vol;
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(Self {
            dim: model.dim(),
            level,
            cdf,
            a: model.a.refine(level)?,
            b: model.b.refine(level)?,
        })
    }

    pub fn draw<R: RngCore>(&self, rng: &mut R) -> Observation {
        let u = rng::uniform(rng);
        let cell = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let coords = cells::demorton(cell, self.dim, self.level);
        let side = 1.0 / (1u64 << self.level) as f64;
        let mut z = [0.0; 2];
        for a in 0..self.dim {
            let lo = coords[a] as f64 * side;
            let hi = (coords[a] + 1) as f64 * side;
            z[a] = (lo + rng::uniform(rng) * side).min(hi.next_down());
        }
        let a = rng::bernoulli(rng, 1.0 / self.a.values()[cell]);
        let y = rng::bernoulli(rng, self.b.values()[cell]);
        Observation { z, a, y: a && y }
    }

    pub fn sample<R: RngCore>(&self, n: usize, rng: &mut R) -> Vec<Observation> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}
