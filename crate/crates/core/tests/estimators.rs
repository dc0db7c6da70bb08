use hoif::basis::{Basis, DyadicGrid, QuadratureRule};
use hoif::cells::CellFunction;
use hoif::estimators::{
    bias_oracle, density_point_estimate, estimate, exact_bias, quadratic_estimate, quadratic_variance,
    Estimator, EstimatorConfig,
};
use hoif::mar::{
    ErrorDirections, ModelSpec, Observation, PreliminaryFit, SyntheticSpec, TripletModel, Weights,
};
use hoif::projection::WeightedProjection;
use hoif::rng;
use hoif::ustat::ustat_naive;
use proptest::prelude::*;

fn model(dim: usize, level: u32, seed: u64) -> TripletModel {
    TripletModel::synthesize(&ModelSpec {
        dim,
        level,
        alpha: 0.6,
        beta: 0.6,
        gamma_f: 1.0,
        eta: 0.1,
        seed,
    })
    .unwrap()
}

fn fit(m: &TripletModel, n: usize, seed: u64) -> PreliminaryFit {
    PreliminaryFit::synthetic(
        m,
        n,
        &SyntheticSpec {
            alpha: 0.4,
            beta: 0.4,
            gamma: 0.8,
            c_a: 0.8,
            c_b: 0.4,
            c_g: 0.4,
            seed,
            directions: ErrorDirections::Aligned,
        },
    )
    .unwrap()
}

fn sample(m: &TripletModel, n: usize, seed: u64) -> Vec<Observation> {
    m.sampler().unwrap().sample(n, &mut rng::stream(seed, 0))
}

/// `Π` in `L2(ā b̄ ĝ)` built from basis Grams, independent of the cell link algebra.
fn oracle_projection(est: &Estimator, k: usize) -> WeightedProjection {
    let dim = est.gram_weight().dim();
    let mut level = 0;
    while 1usize << (level as usize * dim) < k {
        level += 1;
    }
    let basis = Basis::new(dim, level).unwrap();
    let rule = QuadratureRule::new(dim, level.max(est.gram_weight().level())).unwrap();
    WeightedProjection::prefix(&basis, k, est.gram_weight(), &rule).unwrap()
}

/// Order-`j` term from the explicit centered kernels, summed over distinct tuples.
fn naive_term(est: &Estimator, obs: &[Observation], k: usize, j: usize) -> f64 {
    let dim = obs[0].point(2).len().min(est.gram_weight().dim());
    let p = oracle_projection(est, k);
    let n = obs.len();
    let kern: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|l| p.kernel(obs[i].point(dim), obs[l].point(dim)).unwrap()).collect())
        .collect();
    let fit = est.fit();
    let w = &est.config().weights;
    let sc = hoif::mar::score_triple(obs, dim, fit, w).unwrap();
    let idx: Vec<usize> = (0..n).collect();
    let (at, ab, yt) = (&sc.a_tilde, &sc.a_bar, &sc.y_tilde);
    let v = ustat_naive(&idx, j, |t| {
        let t: Vec<usize> = t.iter().map(|&&i| i).collect();
        let core = match j {
            2 => kern[t[0]][t[1]],
            3 => kern[t[0]][t[1]] * ab[t[1]] * kern[t[1]][t[2]] - kern[t[0]][t[2]],
            4 => {
                let (a, b, c, d) = (t[0], t[1], t[2], t[3]);
                kern[a][b] * ab[b] * kern[b][c] * ab[c] * kern[c][d]
                    - kern[a][b] * ab[b] * kern[b][d]
                    - kern[a][c] * ab[c] * kern[c][d]
                    + kern[a][d]
            }
            _ => unreachable!(),
        };
        at[t[0]] * core * yt[t[j - 1]]
    })
    .unwrap();
    if j % 2 == 0 {
        -v
    } else {
        v
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

#[test]
fn chain_terms_match_explicit_kernels() {
    let m = model(1, 8, 1);
    let f = fit(&m, 100, 2);
    // 64 uses the cell backend, 40 the dense one
    for (k, n, order) in [(64, 25, 3), (40, 25, 3), (16, 18, 4), (12, 18, 4)] {
        let obs = sample(&m, n, 3 + k as u64);
        let est = Estimator::new(&f, &EstimatorConfig::new(1, order, k)).unwrap();
        let rep = est.estimate(&obs).unwrap();
        for j in 2..=order {
            let naive = naive_term(&est, &obs, k, j);
            assert!(rel(rep.term(j).unwrap(), naive) < 1e-10, "k {k} j {j}: {} vs {naive}", rep.term(j).unwrap());
        }
    }
}

#[test]
fn chain_terms_match_in_two_dimensions_with_weights() {
    let m = model(2, 4, 5);
    let f = fit(&m, 100, 6);
    let mut r = rng::stream(9, 9);
    let mut rand_w = || CellFunction::new(2, 1, (0..4).map(|_| 0.5 + rng::uniform(&mut r)).collect()).unwrap();
    let weights = Weights { a_bar: rand_w(), b_bar: rand_w() };
    let obs = sample(&m, 22, 7);
    for k in [16, 10] {
        let cfg = EstimatorConfig::new(2, 3, k).with_weights(weights.clone());
        let est = Estimator::new(&f, &cfg).unwrap();
        let rep = est.estimate(&obs).unwrap();
        for j in 2..=3 {
            assert!(rel(rep.term(j).unwrap(), naive_term(&est, &obs, k, j)) < 1e-10);
        }
    }
}

#[test]
fn empty_projection_reduces_to_the_linear_estimator() {
    let m = model(1, 6, 1);
    let f = fit(&m, 100, 2);
    let obs = sample(&m, 50, 3);
    let direct: f64 = obs
        .iter()
        .map(|o| {
            let z = o.point(1);
            let ah = f.a_hat.eval(z).unwrap();
            let bh = f.b_hat.eval(z).unwrap();
            o.a_f64() * ah * (o.ya_f64() - bh) + bh
        })
        .sum::<f64>()
        / 50.0;
    let r1 = estimate(&obs, &f, &EstimatorConfig::new(1, 1, 0)).unwrap();
    let r2 = estimate(&obs, &f, &EstimatorConfig::new(1, 2, 0)).unwrap();
    assert!((r1.value - direct).abs() < 1e-14);
    assert_eq!(r1.value, r2.value);
}

#[test]
fn orders_nest_additively() {
    let m = model(1, 8, 11);
    let f = fit(&m, 100, 12);
    let obs = sample(&m, 80, 13);
    let reps: Vec<_> = (1..=4)
        .map(|o| estimate(&obs, &f, &EstimatorConfig::new(1, o, 32)).unwrap())
        .collect();
    for o in 1..4 {
        let added = reps[o].term(o + 1).unwrap();
        assert!((reps[o].value - reps[o - 1].value - added).abs() < 1e-12);
    }
    for r in &reps {
        let s: f64 = r.terms.iter().sum::<f64>() + r.linear;
        assert!((r.value - s).abs() < 1e-12);
    }
}

#[test]
fn wide_cutoff_reproduces_the_full_third_order_estimate() {
    let m = model(1, 12, 21);
    let n = 64;
    let f = fit(&m, n, 22);
    let grid = DyadicGrid::build(n, 2048, 0.5, 0.7, 1).unwrap();
    let full = Estimator::new(&f, &EstimatorConfig::new(1, 3, 2048)).unwrap();
    let cut = Estimator::new(
        &f,
        &EstimatorConfig::new(1, 3, 2048).truncated(grid.clone(), grid.r_max() + grid.s_max()),
    )
    .unwrap();
    for seed in 0..20 {
        let obs = sample(&m, n, 100 + seed);
        let a = full.estimate(&obs).unwrap();
        let b = cut.estimate(&obs).unwrap();
        assert!(rel(b.value, a.value) <= 1e-12);
        for j in 2..=3 {
            assert!(rel(b.term(j).unwrap(), a.term(j).unwrap()) <= 1e-12);
        }
    }
}

#[test]
fn truncated_kernels_sum_the_retained_block_pairs() {
    // direct sum over retained (r, s) of Ã [Π^r Ā Π^s - Π^(k_{r-1} ∨ l_{s-1}, k_r ∧ l_s]] Ỹ
    let m = model(1, 8, 31);
    let n = 20;
    let f = fit(&m, 100, 32);
    let obs = sample(&m, n, 33);
    let grid = DyadicGrid::build(4, 128, 0.8, 0.6, 1).unwrap();
    for cutoff in 0..=grid.r_max() + grid.s_max() {
        let est = Estimator::new(&f, &EstimatorConfig::new(1, 3, 128).truncated(grid.clone(), cutoff)).unwrap();
        let got = est.estimate(&obs).unwrap().term(3).unwrap();
        let w = est.gram_weight();
        let basis = Basis::new(1, 7).unwrap();
        let rule = QuadratureRule::new(1, 8).unwrap();
        let mut sizes: Vec<usize> = grid.k_grid.iter().chain(&grid.l_grid).copied().collect();
        sizes.sort_unstable();
        sizes.dedup();
        let mats: std::collections::BTreeMap<usize, Vec<Vec<f64>>> = sizes
            .iter()
            .map(|&s| {
                let p = WeightedProjection::prefix(&basis, s, w, &rule).unwrap();
                let k = (0..n)
                    .map(|i| (0..n).map(|j| p.kernel(obs[i].point(1), obs[j].point(1)).unwrap()).collect())
                    .collect();
                (s, k)
            })
            .collect();
        let kern = |lo: usize, hi: usize, i: usize, j: usize| -> f64 {
            if hi <= lo {
                return 0.0;
            }
            mats[&hi][i][j] - if lo == 0 { 0.0 } else { mats[&lo][i][j] }
        };
        let sc = hoif::mar::score_triple(&obs, 1, &f, &est.config().weights).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let pairs = grid.retained_pairs(cutoff);
        let naive = ustat_naive(&idx, 3, |t| {
            let (i, j, l) = (*t[0], *t[1], *t[2]);
            let mut s = 0.0;
            for &(r, q) in &pairs {
                let (r, q) = (r as isize, q as isize);
                let lead = kern(grid.k_at(r - 1), grid.k_at(r), i, j)
                    * sc.a_bar[j]
                    * kern(grid.l_at(q - 1), grid.l_at(q), j, l);
                let lo = grid.k_at(r - 1).max(grid.l_at(q - 1));
                let hi = grid.k_at(r).min(grid.l_at(q));
                s += lead - kern(lo, hi, i, l);
            }
            sc.a_tilde[i] * s * sc.y_tilde[l]
        })
        .unwrap();
        assert!(rel(got, naive) < 1e-9, "cutoff {cutoff}: {got} vs {naive}");
    }
}

#[test]
fn exact_bias_matches_section_quadrature() {
    // second-order conditional bias as a double integral of projection sections
    let m = model(1, 7, 41);
    let f = fit(&m, 100, 42);
    let k = 24;
    let est = Estimator::new(&f, &EstimatorConfig::new(1, 2, k)).unwrap();
    let b = exact_bias(&est, &m).unwrap();
    let p = oracle_projection(&est, k);
    let g = m.g();
    let u = f.a_hat.sub(&m.a).unwrap().mul(&g).unwrap();
    let v = m.b.sub(&f.b_hat).unwrap().mul(&g).unwrap();
    let rule = QuadratureRule::new(1, 7).unwrap();
    let mut second = 0.0;
    for c in 0..rule.len() {
        let z = rule.midpoint(c);
        let s = p.section(&z[..1]).unwrap();
        second += u.values()[c] * s.inner(&v).unwrap() * rule.volume();
    }
    let first = f.a_hat.sub(&m.a).unwrap().mul(&m.b.sub(&f.b_hat).unwrap()).unwrap().inner(&g).unwrap();
    assert!((b.first_order - first).abs() < 1e-14);
    assert!((b.terms[0] + second).abs() < 1e-12, "{} vs {}", b.terms[0], -second);
}

#[test]
fn bias_vanishes_when_either_nuisance_is_exact() {
    let m = model(1, 8, 51);
    let f = fit(&m, 100, 52);
    let exact_a = PreliminaryFit { a_hat: m.a.clone(), ..f.clone() };
    let exact_b = PreliminaryFit { b_hat: m.b.clone(), ..f.clone() };
    for ff in [&exact_a, &exact_b] {
        for order in 1..=3 {
            let est = Estimator::new(ff, &EstimatorConfig::new(1, order, 32)).unwrap();
            assert_eq!(exact_bias(&est, &m).unwrap().total, 0.0);
        }
        let c = bias_oracle(&m, ff, &Weights::unit(1), 32, None).unwrap();
        assert_eq!(c.first_order, 0.0);
        assert_eq!(c.projection_remainder, 0.0);
    }
}

#[test]
fn known_density_bias_is_the_projection_remainder() {
    let m = model(1, 9, 61);
    let f = fit(&m, 100, 62);
    for k in [1, 8, 64, 100] {
        let cfg = EstimatorConfig::new(1, 3, k).known_density(m.g());
        let est = Estimator::new(&f, &cfg).unwrap();
        let b = exact_bias(&est, &m).unwrap();
        let c = bias_oracle(&m, &f, &Weights::unit(1), k, None).unwrap();
        assert!((b.total - c.projection_remainder).abs() < 1e-12 * c.first_order.abs().max(1e-3));
        assert!(b.terms[1].abs() < 1e-15);
    }
}

#[test]
fn errors_inside_the_span_leave_no_remainder() {
    let m = TripletModel::constant(1, 8, 0.1).unwrap();
    let f = fit(&m, 100, 72);
    // replace the errors by their level-3 cell averages
    let a_hat = m.a.add(&f.a_hat.sub(&m.a).unwrap().coarsen(3).unwrap()).unwrap();
    let b_hat = m.b.add(&f.b_hat.sub(&m.b).unwrap().coarsen(3).unwrap()).unwrap();
    let inside = PreliminaryFit::from_parts(&m, a_hat, b_hat, m.g()).unwrap();
    let c = bias_oracle(&m, &inside, &Weights::unit(1), 8, None).unwrap();
    assert!(c.first_order.abs() > 1e-4);
    assert!(c.projection_remainder.abs() < 1e-15);
}

#[test]
fn hyperbola_bound_is_zero_for_exact_density() {
    let m = model(1, 8, 81);
    let f = fit(&m, 100, 82).with_known_g(&m);
    let grid = DyadicGrid::build(16, 256, 0.5, 0.5, 1).unwrap();
    let c = bias_oracle(&m, &f, &Weights::unit(1), 256, Some((&grid, 1))).unwrap();
    assert_eq!(c.hyperbola_bound, Some(0.0));
    let g = fit(&m, 100, 82);
    let c = bias_oracle(&m, &g, &Weights::unit(1), 256, Some((&grid, 1))).unwrap();
    assert!(c.hyperbola_bound.unwrap() > 0.0);
}

#[test]
fn configuration_errors() {
    let m = model(1, 6, 1);
    let f = fit(&m, 100, 2);
    assert!(Estimator::new(&f, &EstimatorConfig::new(1, 5, 8)).is_err());
    let grid = DyadicGrid::build(8, 64, 0.5, 0.5, 1).unwrap();
    assert!(Estimator::new(&f, &EstimatorConfig::new(1, 2, 64).truncated(grid.clone(), 1)).is_err());
    assert!(Estimator::new(&f, &EstimatorConfig::new(1, 3, 32).truncated(grid, 1)).is_err());
    assert!(estimate(&[], &f, &EstimatorConfig::new(1, 1, 0)).is_err());
}

#[test]
fn quadratic_estimate_is_one_for_the_constants() {
    let basis = Basis::new(1, 3).unwrap();
    let rule = QuadratureRule::for_basis(&basis);
    let one = CellFunction::constant(1, 0, 1.0).unwrap();
    let p = WeightedProjection::prefix(&basis, 1, &one, &rule).unwrap();
    let mut r = rng::stream(1, 1);
    let pts: Vec<[f64; 1]> = (0..37).map(|_| [rng::uniform(&mut r)]).collect();
    let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    assert_eq!(quadratic_estimate(&refs, &p).unwrap(), 1.0);
    assert_eq!(density_point_estimate(&refs, &[0.3], &p, &one).unwrap(), 1.0);
}

#[test]
fn quadratic_estimate_matches_pairwise_kernel_average() {
    let basis = Basis::new(1, 4).unwrap();
    let rule = QuadratureRule::for_basis(&basis);
    let one = CellFunction::constant(1, 0, 1.0).unwrap();
    let p = WeightedProjection::prefix(&basis, 11, &one, &rule).unwrap();
    let mut r = rng::stream(2, 1);
    let pts: Vec<[f64; 1]> = (0..15).map(|_| [rng::uniform(&mut r)]).collect();
    let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    let naive = ustat_naive(&refs, 2, |t| p.kernel(t[0], t[1]).unwrap()).unwrap();
    assert!(rel(quadratic_estimate(&refs, &p).unwrap(), naive) < 1e-12);
}

#[test]
fn quadratic_variance_matches_monte_carlo() {
    let basis = Basis::new(1, 3).unwrap();
    let rule = QuadratureRule::for_basis(&basis);
    let one = CellFunction::constant(1, 0, 1.0).unwrap();
    let p = WeightedProjection::prefix(&basis, 8, &one, &rule).unwrap();
    let dens = CellFunction::new(1, 2, vec![0.5, 1.5, 1.2, 0.8]).unwrap();
    let n = 40;
    let want = quadratic_variance(&p, &dens, n).unwrap();
    let cdf = [0.125, 0.5, 0.8, 1.0];
    let reps = 20000;
    let mut vals = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut r = rng::stream(5, rep as u64);
        let pts: Vec<[f64; 1]> = (0..n)
            .map(|_| {
                let u = rng::uniform(&mut r);
                let c = cdf.iter().position(|&c| u < c).unwrap();
                [(c as f64 + rng::uniform(&mut r)) / 4.0]
            })
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        vals.push(quadratic_estimate(&refs, &p).unwrap());
    }
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
    // E U_n Π = ∫ (Πp)^2 = Σ_cells (mass)^2 / vol at level 2
    let target: f64 = [0.5f64, 1.5, 1.2, 0.8].iter().map(|d| d * d / 4.0).sum();
    assert!((mean - target).abs() < 4.0 * (var / reps as f64).sqrt());
}

#[test]
fn density_estimate_mean_is_the_cell_average() {
    let basis = Basis::new(1, 2).unwrap();
    let rule = QuadratureRule::new(1, 3).unwrap();
    let one = CellFunction::constant(1, 0, 1.0).unwrap();
    let p = WeightedProjection::prefix(&basis, 4, &one, &rule).unwrap();
    let dens = [0.4, 1.6, 1.0, 1.0, 0.6, 1.4, 1.2, 0.8];
    let cdf: Vec<f64> = dens.iter().scan(0.0, |s, d| { *s += d / 8.0; Some(*s) }).collect();
    let x = [0.1];
    let flat = CellFunction::constant(1, 0, 1.0).unwrap();
    let reps = 4000;
    let mut vals = Vec::new();
    for rep in 0..reps {
        let mut r = rng::stream(6, rep);
        let pts: Vec<[f64; 1]> = (0..50)
            .map(|_| {
                let u = rng::uniform(&mut r);
                let c = cdf.iter().position(|&c| u < c).unwrap_or(7);
                [(c as f64 + rng::uniform(&mut r)) / 8.0]
            })
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        vals.push(density_point_estimate(&refs, &x, &p, &flat).unwrap());
    }
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    // x lies in the first level-2 cell, whose average density is (0.4 + 1.6) / 2
    assert!((mean - 1.0).abs() < 4.0 * sd / (reps as f64).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn value_is_the_sum_of_its_terms(seed in 0u64..500, order in 1usize..=3) {
        let m = model(1, 6, seed);
        let f = fit(&m, 100, seed + 1);
        let obs = sample(&m, 30, seed + 2);
        let r = estimate(&obs, &f, &EstimatorConfig::new(1, order, 16)).unwrap();
        let s = r.terms.iter().fold(r.linear, |a, t| a + t);
        prop_assert!((r.value - s).abs() <= 1e-12);
    }

    #[test]
    fn permuting_the_sample_leaves_the_estimate_unchanged(seed in 0u64..500, order in 2usize..=4) {
        let m = model(1, 6, seed);
        let f = fit(&m, 100, seed + 1);
        let mut obs = sample(&m, 24, seed + 2);
        let a = estimate(&obs, &f, &EstimatorConfig::new(1, order, 16)).unwrap();
        obs.reverse();
        obs.rotate_left((seed % 7) as usize);
        let b = estimate(&obs, &f, &EstimatorConfig::new(1, order, 16)).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-10 * (1.0 + a.value.abs()));
    }
}
