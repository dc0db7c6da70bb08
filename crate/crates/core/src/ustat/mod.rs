//! U-statistics over distinct index tuples.

mod cellsys;
mod chain;
mod dense;
pub mod hoeffding;

pub use cellsys::{CellSystem, LevelCombo, LevelMasses};
pub use chain::{path_ustat, ustat_chain, ChainKernel, LinkSystem, Path};
pub use dense::DenseSystem;

use alloc::vec;

use crate::error::{Error, Result};

/// Largest sample accepted by [`ustat_naive`].
pub const NAIVE_LIMIT: usize = 60;

/// `n (n-1) ... (n-m+1)`.
pub fn falling(n: usize, m: usize) -> f64 {
    (0..m).map(|i| (n - i) as f64).product()
}

/// `n choose m`.
pub fn binomial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..m {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Average of `f` over all ordered tuples of `m` distinct sample points.
pub fn ustat_naive<X>(sample: &[X], m: usize, f: impl Fn(&[&X]) -> f64) -> Result<f64> {
    let n = sample.len();
    if m == 0 || n < m {
        return Err(Error::SampleTooSmall { needed: m.max(1), found: n });
    }
    if n > NAIVE_LIMIT {
        return Err(Error::SampleTooLarge {
            limit: NAIVE_LIMIT,
            found: n,
        });
    }
    let mut idx = vec![0usize; m];
    let mut used = vec![false; n];
    let mut args: alloc::vec::Vec<&X> = alloc::vec::Vec::with_capacity(m);
    let mut total = 0.0;
    #[allow(clippy::too_many_arguments)]
    fn rec<'a, X>(
        depth: usize,
        sample: &'a [X],
        idx: &mut [usize],
        used: &mut [bool],
        args: &mut alloc::vec::Vec<&'a X>,
        total: &mut f64,
        f: &dyn Fn(&[&X]) -> f64,
    ) {
        if depth == idx.len() {
            args.clear();
            args.extend(idx.iter().map(|&i| &sample[i]));
            *total += f(args);
            return;
        }
        for i in 0..sample.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            idx[depth] = i;
            rec(depth + 1, sample, idx, used, args, total, f);
            used[i] = false;
        }
    }
    rec(0, sample, &mut idx, &mut used, &mut args, &mut total, &f);
    Ok(total / falling(n, m))
}
