use hoif::basis::{Basis, QuadratureRule};
use hoif::cells::{self, CellFunction};
use hoif::projection::WeightedProjection;
use hoif::rng::{self, ChaCha8Rng};
use proptest::prelude::*;

fn weight(r: &mut ChaCha8Rng, dim: usize, level: u32) -> CellFunction {
    let v = (0..cells::cell_count(dim, level)).map(|_| 0.3 + 2.0 * rng::uniform(r)).collect();
    CellFunction::new(dim, level, v).unwrap()
}

fn point(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng::uniform(r)).collect()
}

fn setup(seed: u64, dim: usize, level: u32) -> (Basis, QuadratureRule, CellFunction, ChaCha8Rng) {
    let mut r = rng::stream(seed, 0);
    let basis = Basis::new(dim, level).unwrap();
    let rule = QuadratureRule::for_basis(&basis);
    let w = weight(&mut r, dim, level);
    (basis, rule, w, r)
}

#[test]
fn gram_entries_match_midpoint_sums() {
    for dim in [1, 2] {
        let (basis, rule, w, _) = setup(3, dim, if dim == 1 { 4 } else { 2 });
        let idx: Vec<usize> = (0..basis.len()).step_by(2).collect();
        let p = WeightedProjection::build(&basis, &idx, &w, &rule).unwrap();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let want = rule
                    .integrate(|z| basis.eval(i, z).unwrap() * basis.eval(j, z).unwrap() * w.eval(z).unwrap())
                    .unwrap();
                assert!((p.gram()[(a, b)] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn unweighted_haar_gram_is_the_identity() {
    let basis = Basis::new(2, 3).unwrap();
    let rule = QuadratureRule::for_basis(&basis);
    let one = CellFunction::constant(2, 0, 1.0).unwrap();
    let p = WeightedProjection::prefix(&basis, basis.len(), &one, &rule).unwrap();
    let g = p.gram();
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn resolution_kernel_is_a_scaled_cell_indicator() {
    let (dim, level) = (2usize, 3u32);
    let basis = Basis::new(dim, level).unwrap();
    let rule = QuadratureRule::for_basis(&basis);
    let one = CellFunction::constant(dim, 0, 1.0).unwrap();
    let p = WeightedProjection::prefix(&basis, basis.len(), &one, &rule).unwrap();
    let mut r = rng::stream(9, 0);
    for _ in 0..40 {
        let (z1, z2) = (point(&mut r, dim), point(&mut r, dim));
        let same = cells::cell_of(&z1, dim, level).unwrap() == cells::cell_of(&z2, dim, level).unwrap();
        let want = if same { 64.0 } else { 0.0 };
        assert!((p.kernel(&z1, &z2).unwrap() - want).abs() < 1e-9);
        assert_eq!(p.kernel(&z1, &z1).unwrap(), 64.0);
    }
}

#[test]
fn weighted_resolution_kernel_divides_by_cell_mass() {
    let (basis, rule, w, mut r) = setup(21, 1, 5);
    let level = 3;
    let p = WeightedProjection::prefix(&basis, 8, &w, &rule).unwrap();
    let masses = w.cell_masses(level).unwrap();
    for _ in 0..30 {
        let (z1, z2) = (point(&mut r, 1), point(&mut r, 1));
        let (c1, c2) = (cells::cell_of(&z1, 1, level).unwrap(), cells::cell_of(&z2, 1, level).unwrap());
        let want = if c1 == c2 { 1.0 / masses[c1] } else { 0.0 };
        assert!((p.kernel(&z1, &z2).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn block_is_the_difference_of_prefixes_and_orthogonal_to_the_lower_one() {
    let (basis, rule, w, mut r) = setup(5, 1, 5);
    let (lo, hi) = (4, 16);
    let block = WeightedProjection::block(&basis, lo, hi, &w, &rule).unwrap();
    let upper = WeightedProjection::prefix(&basis, hi, &w, &rule).unwrap();
    let lower = WeightedProjection::prefix(&basis, lo, &w, &rule).unwrap();
    let f = weight(&mut r, 1, 5);
    let pf = block.project(&f).unwrap().function;
    let diff = upper.project(&f).unwrap().function.sub(&lower.project(&f).unwrap().function).unwrap();
    assert!(pf.sub(&diff).unwrap().sup_norm() < 1e-10);
    assert!(lower.project(&pf).unwrap().function.sup_norm() < 1e-10);
    for _ in 0..10 {
        let (z1, z2) = (point(&mut r, 1), point(&mut r, 1));
        let want = upper.kernel(&z1, &z2).unwrap() - lower.kernel(&z1, &z2).unwrap();
        assert!((block.kernel(&z1, &z2).unwrap() - want).abs() < 1e-10);
    }
    assert!((block.trace().unwrap() - (hi - lo) as f64).abs() < 1e-9);
}

#[test]
fn kernel_derivative_in_the_weight() {
    // d/dt Π_{w + tφ}(z1, z2) at t = 0 is -∫ Π(z1, z) Π(z, z2) φ(z) dz
    let (basis, rule, w, mut r) = setup(13, 1, 4);
    let phi = weight(&mut r, 1, 4).map(|v| v - 1.0);
    let k = 11;
    let p0 = WeightedProjection::prefix(&basis, k, &w, &rule).unwrap();
    let h = 1e-5;
    let plus = WeightedProjection::prefix(&basis, k, &w.add(&phi.scale(h)).unwrap(), &rule).unwrap();
    let minus = WeightedProjection::prefix(&basis, k, &w.add(&phi.scale(-h)).unwrap(), &rule).unwrap();
    for _ in 0..6 {
        let (z1, z2) = (point(&mut r, 1), point(&mut r, 1));
        let fd = (plus.kernel(&z1, &z2).unwrap() - minus.kernel(&z1, &z2).unwrap()) / (2.0 * h);
        let s1 = p0.section(&z1).unwrap();
        let s2 = p0.section(&z2).unwrap();
        let want = -s1.mul(&s2).unwrap().inner(&phi).unwrap();
        assert!((fd - want).abs() < 1e-5 * (1.0 + want.abs()), "{fd} vs {want}");
    }
}

#[test]
fn sample_sums_match_pairwise_kernels() {
    let (basis, rule, w, mut r) = setup(31, 2, 2);
    let p = WeightedProjection::block(&basis, 4, 16, &w, &rule).unwrap();
    let pts: Vec<Vec<f64>> = (0..7).map(|_| point(&mut r, 2)).collect();
    let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    let (all, diag) = p.sample_sums(&refs).unwrap();
    let mut want_all = 0.0;
    let mut want_diag = 0.0;
    for (i, a) in refs.iter().enumerate() {
        for (j, b) in refs.iter().enumerate() {
            let v = p.kernel(a, b).unwrap();
            want_all += v;
            if i == j {
                want_diag += v;
            }
        }
    }
    assert!((all - want_all).abs() < 1e-9 * want_all.abs().max(1.0));
    assert!((diag - want_diag).abs() < 1e-9 * want_diag.abs().max(1.0));
}

#[test]
fn invalid_inputs_are_rejected() {
    let (basis, rule, w, _) = setup(1, 1, 3);
    assert!(WeightedProjection::build(&basis, &[1, 1], &w, &rule).is_err());
    assert!(WeightedProjection::build(&basis, &[8], &w, &rule).is_err());
    let neg = w.map(|v| v - 10.0);
    assert!(WeightedProjection::prefix(&basis, 3, &neg, &rule).is_err());
}

proptest! {
    #[test]
    fn projecting_twice_changes_nothing(seed in 0u64..10_000, k in 1usize..32) {
        let (basis, rule, w, mut r) = setup(seed, 1, 5);
        let p = WeightedProjection::prefix(&basis, k, &w, &rule).unwrap();
        let f = weight(&mut r, 1, 5);
        let once = p.project(&f).unwrap().function;
        let twice = p.project(&once).unwrap().function;
        prop_assert!(once.sub(&twice).unwrap().sup_norm() < 1e-9 * (1.0 + once.sup_norm()));
    }

    #[test]
    fn residual_is_orthogonal_to_the_span(seed in 0u64..10_000, k in 1usize..16, dim in 1usize..=2) {
        let level = if dim == 1 { 4 } else { 2 };
        let (basis, rule, w, mut r) = setup(seed, dim, level);
        let p = WeightedProjection::prefix(&basis, k, &w, &rule).unwrap();
        let f = weight(&mut r, dim, level);
        let resid = f.sub(&p.project(&f).unwrap().function).unwrap();
        for m in p.moments(&resid).unwrap() {
            prop_assert!(m.abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_is_symmetric(seed in 0u64..10_000, k in 1usize..32) {
        let (basis, rule, w, mut r) = setup(seed, 1, 5);
        let p = WeightedProjection::prefix(&basis, k, &w, &rule).unwrap();
        let (z1, z2) = (point(&mut r, 1), point(&mut r, 1));
        let a = p.kernel(&z1, &z2).unwrap();
        let b = p.kernel(&z2, &z1).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}
