//! Degenerate parts, Hoeffding decompositions and variances of kernels under
//! a discrete measure, by exhaustive tabulation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ustat::binomial;

/// Largest table `atoms^m` built by tabulation.
pub const TABLE_LIMIT: usize = 1 << 22;

/// Largest space accepted by [`TabulatedKernel::decompose`].
pub const DECOMPOSE_LIMIT: usize = 8;

/// Finitely supported probability measure.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure<X> {
    atoms: Vec<X>,
    probs: Vec<f64>,
}

impl<X> DiscreteMeasure<X> {
    pub fn new(atoms: Vec<X>, probs: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() || atoms.is_empty() {
            return Err(Error::ShapeMismatch("atoms and probabilities"));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("probabilities must sum to one"));
        }
        Ok(Self { atoms, probs })
    }

    pub fn atoms(&self) -> &[X] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `∫ f dP`.
    pub fn expect(&self, f: impl Fn(&X) -> f64) -> f64 {
        self.atoms.iter().zip(&self.probs).map(|(x, p)| p * f(x)).sum()
    }
}

/// Kernel of order `m` tabulated on atom indices (first argument most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    order: usize,
    atoms: usize,
    values: Vec<f64>,
}

/// One component `f_S` of a Hoeffding decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Argument positions the component depends on, ascending.
    pub subset: Vec<usize>,
    /// Values on the full `atoms^m` grid (constant in the other positions).
    pub kernel: TabulatedKernel,
}

impl Component {
    pub fn order(&self) -> usize {
        self.subset.len()
    }
}

impl TabulatedKernel {
    /// Tabulates `f` on all `m`-tuples of atoms.
    pub fn tabulate<X>(
        measure: &DiscreteMeasure<X>,
        m: usize,
        f: impl Fn(&[&X]) -> f64,
    ) -> Result<Self> {
        let n = measure.len();
        let size = checked_size(n, m)?;
        let mut values = Vec::with_capacity(size);
        let mut idx = vec![0usize; m];
        let mut args: Vec<&X> = Vec::with_capacity(m);
        for flat in 0..size {
            unflatten(flat, n, &mut idx);
            args.clear();
            args.extend(idx.iter().map(|&i| &measure.atoms[i]));
            let v = f(&args);
            if !v.is_finite() {
                return Err(Error::NonFinite("kernel value"));
            }
            values.push(v);
        }
        Ok(Self {
            order: m,
            atoms: n,
            values,
        })
    }

    pub fn from_values(order: usize, atoms: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != checked_size(atoms, order)? {
            return Err(Error::ShapeMismatch("kernel table size"));
        }
        Ok(Self {
            order,
            atoms,
            values,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, idx: &[usize]) -> f64 {
        self.values[flatten(idx, self.atoms)]
    }

    /// Integrates out every position not in `keep` (a bit mask), returning a
    /// table on the full grid that is constant along the integrated positions.
    fn marginal(&self, probs: &[f64], keep: usize) -> Vec<f64> {
        let mut t = self.values.clone();
        let n = self.atoms;
        for pos in 0..self.order {
            if keep >> pos & 1 == 1 {
                continue;
            }
            let stride = n.pow((self.order - 1 - pos) as u32);
            let mut out = vec![0.0; t.len()];
            for (flat, o) in out.iter_mut().enumerate() {
                let digit = (flat / stride) % n;
                let base = flat - digit * stride;
                let mut s = 0.0;
                for (a, &p) in probs.iter().enumerate() {
                    s += p * t[base + a * stride];
                }
                *o = s;
            }
            t = out;
        }
        t
    }

    fn check_measure<X>(&self, measure: &DiscreteMeasure<X>) -> Result<()> {
        if measure.len() != self.atoms {
            return Err(Error::ShapeMismatch("measure and kernel atoms"));
        }
        Ok(())
    }

    /// Degenerate part `Σ_{A ⊆ {1..m}} (-1)^{m-|A|} P^{m-|A|} f(x_A)`.
    pub fn degenerate_part<X>(&self, measure: &DiscreteMeasure<X>) -> Result<Self> {
        self.degenerate_part_signed(measure, false)
    }

    pub(crate) fn degenerate_part_signed<X>(
        &self,
        measure: &DiscreteMeasure<X>,
        flip: bool,
    ) -> Result<Self> {
        self.check_measure(measure)?;
        if self.order > 3 {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let full = (1usize << self.order) - 1;
        let mut out = vec![0.0; self.values.len()];
        for keep in 0..=full {
            let dropped = self.order - (keep as u32).count_ones() as usize;
            let mut sign = if dropped % 2 == 0 { 1.0 } else { -1.0 };
            if flip && dropped == 1 {
                sign = -sign;
            }
            let marg = self.marginal(&measure.probs, keep);
            for (o, v) in out.iter_mut().zip(marg) {
                *o += sign * v;
            }
        }
        Ok(Self {
            order: self.order,
            atoms: self.atoms,
            values: out,
        })
    }

    /// Largest `|E f|` over each single integrated position, all others fixed.
    pub fn degeneracy_residual<X>(&self, measure: &DiscreteMeasure<X>) -> Result<f64> {
        self.check_measure(measure)?;
        let full = (1usize << self.order) - 1;
        let mut worst: f64 = 0.0;
        for pos in 0..self.order {
            let marg = self.marginal(&measure.probs, full & !(1 << pos));
            worst = marg.iter().fold(worst, |m, v| m.max(v.abs()));
        }
        Ok(worst)
    }

    /// `P^m f²`.
    pub fn second_moment<X>(&self, measure: &DiscreteMeasure<X>) -> Result<f64> {
        self.check_measure(measure)?;
        let sq = Self {
            order: self.order,
            atoms: self.atoms,
            values: self.values.iter().map(|v| v * v).collect(),
        };
        Ok(sq.marginal(&measure.probs, 0)[0])
    }

    /// Variance `P^m f² / C(n, m)` of the U-statistic of a degenerate symmetric kernel.
    pub fn hoeffding_variance<X>(&self, measure: &DiscreteMeasure<X>, n: usize) -> Result<f64> {
        if n < self.order {
            return Err(Error::SampleTooSmall {
                needed: self.order,
                found: n,
            });
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let residual = self.degeneracy_residual(measure)?;
        if residual > 1e-9 * scale {
            return Err(Error::NotDegenerate { residual });
        }
        Ok(self.second_moment(measure)? / binomial(n, self.order))
    }

    /// Hoeffding components `f_S` over all subsets `S` of argument positions,
    /// dropping those that vanish to `1e-12` relative.
    pub fn decompose<X>(&self, measure: &DiscreteMeasure<X>) -> Result<Vec<Component>> {
        self.check_measure(measure)?;
        if self.atoms > DECOMPOSE_LIMIT {
            return Err(Error::SpaceTooLarge {
                limit: DECOMPOSE_LIMIT,
                found: self.atoms,
            });
        }
        if self.order > 3 {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let full = (1usize << self.order) - 1;
        let marg: Vec<Vec<f64>> = (0..=full).map(|k| self.marginal(&measure.probs, k)).collect();
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut out = Vec::new();
        // ascending subset size, then mask order
        let mut masks: Vec<usize> = (0..=full).collect();
        masks.sort_by_key(|&k| (k.count_ones(), k));
        for s in masks {
            let mut vals = vec![0.0; self.values.len()];
            let mut b = s;
            loop {
                let sign = if (s.count_ones() - b.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                for (o, v) in vals.iter_mut().zip(&marg[b]) {
                    *o += sign * v;
                }
                if b == 0 {
                    break;
                }
                b = (b - 1) & s;
            }
            if vals.iter().all(|v| v.abs() <= 1e-12 * scale) {
                continue;
            }
            out.push(Component {
                subset: (0..self.order).filter(|p| s >> p & 1 == 1).collect(),
                kernel: Self {
                    order: self.order,
                    atoms: self.atoms,
                    values: vals,
                },
            });
        }
        Ok(out)
    }
}

fn checked_size(atoms: usize, m: usize) -> Result<usize> {
    let size = atoms
        .checked_pow(m as u32)
        .filter(|&s| s <= TABLE_LIMIT)
        .ok_or(Error::SpaceTooLarge {
            limit: TABLE_LIMIT,
            found: usize::MAX,
        })?;
    Ok(size)
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

fn unflatten(mut flat: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_points() -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap()
    }

    #[test]
    fn product_kernel_degenerates_to_centered_product() {
        let mu = three_points();
        let g = |x: f64| x * x;
        let h = |x: f64| 1.0 + x;
        let pg = mu.expect(|x| g(*x));
        let ph = mu.expect(|x| h(*x));
        let f = TabulatedKernel::tabulate(&mu, 2, |x| g(*x[0]) * h(*x[1])).unwrap();
        let d = f.degenerate_part(&mu).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (xi, xj) = (mu.atoms()[i], mu.atoms()[j]);
                let want = (g(xi) - pg) * (h(xj) - ph);
                assert!((d.eval(&[i, j]) - want).abs() < 1e-12);
            }
        }
        assert!(d.degeneracy_residual(&mu).unwrap() < 1e-12);
    }

    #[test]
    fn constant_kernel_has_no_degenerate_part() {
        let mu = three_points();
        let f = TabulatedKernel::tabulate(&mu, 3, |_| 4.2).unwrap();
        let d = f.degenerate_part(&mu).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn additive_kernel_has_two_first_order_components() {
        let mu = DiscreteMeasure::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let f = TabulatedKernel::tabulate(&mu, 2, |x| x[0] + x[1]).unwrap();
        let comps = f.decompose(&mu).unwrap();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.order() == 1));
    }

    #[test]
    fn variance_requires_degeneracy() {
        let mu = three_points();
        let f = TabulatedKernel::tabulate(&mu, 1, |x| *x[0]).unwrap();
        assert!(matches!(
            f.hoeffding_variance(&mu, 10),
            Err(Error::NotDegenerate { .. })
        ));
        let d = f.degenerate_part(&mu).unwrap();
        let mean = mu.expect(|x| *x);
        let var = mu.expect(|x| (x - mean) * (x - mean));
        assert!((d.hoeffding_variance(&mu, 10).unwrap() - var / 10.0).abs() < 1e-14);
    }
}
