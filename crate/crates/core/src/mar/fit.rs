use alloc::vec;
use alloc::vec::Vec;

use crate::basis::round_to_prefix;
use crate::cells::{self, CellFunction};
use crate::error::{Error, Result};
use crate::mar::holder::HolderFunction;
use crate::mar::model::{Bounds, Observation, TripletModel};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Truth plus a rate-calibrated deterministic perturbation.
    Synthetic,
    /// Cell averages on an independent sample.
    Fitted,
}

/// How the synthetic error directions of `â` and `b̂` relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorDirections {
    /// Independent random directions.
    Independent,
    /// `b̂ - b` uses the direction of `â - a`, so the first-order bias is large.
    Aligned,
}

/// Inputs of [`PreliminaryFit::synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub c_g: f64,
    pub seed: u64,
    pub directions: ErrorDirections,
}

/// Preliminary estimators `(â, b̂, ĝ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreliminaryFit {
    pub a_hat: CellFunction,
    pub b_hat: CellFunction,
    pub g_hat: CellFunction,
    pub mode: FitMode,
    /// Share `‖clamped δ‖_2 / ‖δ‖_2` of each synthetic perturbation kept after clamping.
    pub clamp_scales: [f64; 3],
    /// Resolution levels of fitted components.
    pub levels: [u32; 3],
}

/// `n^{-δ/(2δ+d)}`, zero for `δ = ∞`.
pub fn rate(n: usize, smooth: f64, dim: usize) -> f64 {
    if smooth.is_infinite() {
        return 0.0;
    }
    let d = dim as f64;
    libm::pow(n as f64, -smooth / (2.0 * smooth + d))
}

/// Unit-`L2` Hölder direction, or zero when `δ = ∞`.
fn direction(dim: usize, level: u32, smooth: f64, seed: u64) -> Result<CellFunction> {
    let raw = HolderFunction::new(dim, level, smooth, seed)?.synthesize()?;
    let norm = raw.lp_norm(2.0);
    if norm == 0.0 {
        return Ok(raw);
    }
    Ok(raw.scale(1.0 / norm))
}

/// `clamp(base + δ)` and the ratio `‖clamped δ‖_2 / ‖δ‖_2` (1 for `δ = 0`).
fn perturb(
    base: &CellFunction,
    delta: &CellFunction,
    (lo, hi): (f64, f64),
) -> Result<(CellFunction, f64)> {
    let out = base.zip_with(delta, |x, v| (x + v).clamp(lo, hi))?;
    let full = delta.lp_norm(2.0);
    let kept = if full == 0.0 {
        1.0
    } else {
        out.sub(base)?.lp_norm(2.0) / full
    };
    Ok((out, kept))
}

impl PreliminaryFit {
    /// `(a, b, g)` itself.
    pub fn exact(model: &TripletModel) -> Self {
        Self {
            a_hat: model.a.clone(),
            b_hat: model.b.clone(),
            g_hat: model.g(),
            mode: FitMode::Synthetic,
            clamp_scales: [1.0; 3],
            levels: [model.level(); 3],
        }
    }

    /// Assembles a fit from components, checking the bounds of `model`.
    pub fn from_parts(
        model: &TripletModel,
        a_hat: CellFunction,
        b_hat: CellFunction,
        g_hat: CellFunction,
    ) -> Result<Self> {
        let bounds = model.bounds();
        let tol = 1e-12;
        for (h, (lo, hi), what) in [
            (&a_hat, bounds.a, "â outside its bounds"),
            (&b_hat, bounds.b, "b̂ outside its bounds"),
            (&g_hat, bounds.g, "ĝ outside its bounds"),
        ] {
            if h.dim() != model.dim() {
                return Err(Error::ShapeMismatch("fit dimension"));
            }
            if !(h.min() >= lo - tol && h.max() <= hi + tol) {
                return Err(Error::InvalidParameter(what));
            }
        }
        let levels = [a_hat.level(), b_hat.level(), g_hat.level()];
        Ok(Self {
            a_hat,
            b_hat,
            g_hat,
            mode: FitMode::Synthetic,
            clamp_scales: [1.0; 3],
            levels,
        })
    }

    /// `â = clamp(a + c_a n^{-α/(2α+d)} ψ_a)`, likewise for `b̂` (rate `β`) and
    /// `ĝ` (rate `γ`), each `ψ` a unit-norm Hölder direction and the clamp
    /// pointwise into the component's bounds.
    pub fn synthetic(model: &TripletModel, n: usize, spec: &SyntheticSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive"));
        }
        let dim = model.dim();
        let level = model.level();
        let bounds = model.bounds();
        let psi_a = direction(dim, level, spec.alpha, rng::mix(spec.seed, 11))?;
        let psi_b = match spec.directions {
            ErrorDirections::Independent => direction(dim, level, spec.beta, rng::mix(spec.seed, 12))?,
            ErrorDirections::Aligned => direction(dim, level, spec.alpha, rng::mix(spec.seed, 11))?,
        };
        let psi_g = direction(dim, level, spec.gamma, rng::mix(spec.seed, 13))?;
        let da = psi_a.scale(spec.c_a * rate(n, spec.alpha, dim));
        let db = psi_b.scale(spec.c_b * rate(n, spec.beta, dim));
        let dg = psi_g.scale(spec.c_g * rate(n, spec.gamma, dim));
        let (a_hat, sa) = perturb(&model.a, &da, bounds.a)?;
        let (b_hat, sb) = perturb(&model.b, &db, bounds.b)?;
        let (g_hat, sg) = perturb(&model.g(), &dg, bounds.g)?;
        Ok(Self {
            a_hat,
            b_hat,
            g_hat,
            mode: FitMode::Synthetic,
            clamp_scales: [sa, sb, sg],
            levels: [level; 3],
        })
    }

    /// Cell-average fits on an independent sample at the given resolution levels:
    /// `b̂` averages `Y` over `A = 1`, `1/â` averages `A`, and `ĝ` is the histogram
    /// divided by `â`. Empty cells fall back to the global average. Each fit is
    /// clamped into its bounds.
    pub fn fitted(
        model: &TripletModel,
        train: &[Observation],
        levels: [u32; 3],
    ) -> Result<Self> {
        let dim = model.dim();
        let bounds: Bounds = model.bounds();
        if train.is_empty() {
            return Err(Error::EmptySubsample("preliminary sample"));
        }
        let n_treated = train.iter().filter(|o| o.a).count();
        if n_treated == 0 {
            return Err(Error::EmptySubsample("b̂ (no observations with A = 1)"));
        }
        let cell_means = |level: u32, value: &dyn Fn(&Observation) -> Option<f64>| -> Result<Vec<f64>> {
            let count = cells::cell_count(dim, level);
            let mut sum = vec![0.0; count];
            let mut cnt = vec![0usize; count];
            let (mut gs, mut gc) = (0.0, 0usize);
            for o in train {
                if let Some(v) = value(o) {
                    let c = cells::cell_of(o.point(dim), dim, level)?;
                    sum[c] += v;
                    cnt[c] += 1;
                    gs += v;
                    gc += 1;
                }
            }
            let global = gs / gc as f64;
            Ok(sum
                .iter()
                .zip(&cnt)
                .map(|(&s, &c)| if c == 0 { global } else { s / c as f64 })
                .collect())
        };
        let [la, lb, lg] = levels;
        let b_vals = cell_means(lb, &|o| o.a.then(|| o.ya_f64()))?;
        let b_hat = CellFunction::new(dim, lb, b_vals)?.map(|v| v.clamp(bounds.b.0, bounds.b.1));
        let p_vals = cell_means(la, &|o| Some(o.a_f64()))?;
        let a_hat = CellFunction::new(dim, la, p_vals)?.map(|p| {
            let a = if p > 0.0 { 1.0 / p } else { bounds.a.1 };
            a.clamp(bounds.a.0, bounds.a.1)
        });
        let count = cells::cell_count(dim, lg);
        let mut hist = vec![0.0; count];
        for o in train {
            hist[cells::cell_of(o.point(dim), dim, lg)?] += 1.0;
        }
        let scale = count as f64 / train.len() as f64;
        let f_hat = CellFunction::new(dim, lg, hist.into_iter().map(|h| h * scale).collect())?;
        let g_hat = f_hat
            .div(&a_hat)?
            .map(|v| v.clamp(bounds.g.0, bounds.g.1));
        Ok(Self {
            a_hat,
            b_hat,
            g_hat,
            mode: FitMode::Fitted,
            clamp_scales: [1.0; 3],
            levels,
        })
    }

    /// Resolution level whose prefix size is nearest `n^{d/(2δ+d)}`, capped at `max_level`.
    pub fn fitted_level(n: usize, smooth: f64, dim: usize, max_level: u32) -> u32 {
        let d = dim as f64;
        let target = if smooth.is_infinite() {
            1.0
        } else {
            libm::pow(n as f64, d / (2.0 * smooth + d))
        };
        let size = round_to_prefix(target, dim);
        let level = (size.trailing_zeros() as usize / dim) as u32;
        level.min(max_level)
    }

    /// Replaces `ĝ` by `g` (the known-density configuration).
    pub fn with_known_g(mut self, model: &TripletModel) -> Self {
        self.g_hat = model.g();
        self
    }
}
