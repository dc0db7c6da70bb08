use hoif::rng::{self, ChaCha8Rng};
use hoif::ustat::hoeffding::{DiscreteMeasure, TabulatedKernel};
use hoif::ustat::{binomial, ustat_naive};
use proptest::prelude::*;

const ATOMS: usize = 3;

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

fn digits(mut flat: usize, m: usize) -> Vec<usize> {
    let mut d = vec![0; m];
    for slot in d.iter_mut().rev() {
        *slot = flat % ATOMS;
        flat /= ATOMS;
    }
    d
}

fn flat(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * ATOMS + i)
}

/// A random symmetric kernel table and a random law on three atoms.
fn random_setup(r: &mut ChaCha8Rng, m: usize) -> (DiscreteMeasure<usize>, Vec<f64>) {
    let raw: Vec<f64> = (0..ATOMS).map(|_| 0.2 + rng::uniform(r)).collect();
    let total: f64 = raw.iter().sum();
    let measure = DiscreteMeasure::new((0..ATOMS).collect(), raw.iter().map(|p| p / total).collect()).unwrap();
    let size = ATOMS.pow(m as u32);
    let base: Vec<f64> = (0..size).map(|_| 2.0 * rng::uniform(r) - 1.0).collect();
    let perms = permutations(m);
    let sym = (0..size)
        .map(|f| {
            let d = digits(f, m);
            perms
                .iter()
                .map(|p| base[flat(&p.iter().map(|&i| d[i]).collect::<Vec<_>>())])
                .sum::<f64>()
                / perms.len() as f64
        })
        .collect();
    (measure, sym)
}

fn draw(r: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u = rng::uniform(r);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[test]
fn degenerate_variance_matches_monte_carlo() {
    let n = 7;
    let reps = 10_000;
    for m in 1..=3 {
        let mut r = rng::stream(17, m as u64);
        let (measure, table) = random_setup(&mut r, m);
        let kernel = TabulatedKernel::from_values(m, ATOMS, table)
            .unwrap()
            .degenerate_part(&measure)
            .unwrap();
        let want = kernel.hoeffding_variance(&measure, n).unwrap();
        let mut draws = Vec::with_capacity(reps);
        for _ in 0..reps {
            let sample: Vec<usize> = (0..n).map(|_| draw(&mut r, measure.probs())).collect();
            draws.push(ustat_naive(&sample, m, |x| kernel.eval(&x.iter().map(|&&i| i).collect::<Vec<_>>())).unwrap());
        }
        // the mean is zero, so the second moment estimates the variance
        let sq: Vec<f64> = draws.iter().map(|u| u * u).collect();
        let mean = sq.iter().sum::<f64>() / reps as f64;
        let sd = (sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((mean - want).abs() < 4.0 * se, "m={m}: {mean} vs {want} (se {se})");
    }
}

#[test]
fn degenerate_part_of_a_degenerate_kernel_is_itself() {
    let mut r = rng::stream(5, 0);
    let (measure, table) = random_setup(&mut r, 2);
    let once = TabulatedKernel::from_values(2, ATOMS, table).unwrap().degenerate_part(&measure).unwrap();
    let twice = once.degenerate_part(&measure).unwrap();
    for (a, b) in once.values().iter().zip(twice.values()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn nondegenerate_kernels_are_refused() {
    let measure = DiscreteMeasure::new(vec![0usize, 1, 2], vec![0.2, 0.3, 0.5]).unwrap();
    let kernel = TabulatedKernel::from_values(1, ATOMS, vec![1.0, 2.0, 3.0]).unwrap();
    assert!(kernel.hoeffding_variance(&measure, 5).is_err());
}

#[test]
fn components_add_back_to_the_kernel() {
    let mut r = rng::stream(8, 0);
    let (measure, table) = random_setup(&mut r, 3);
    let kernel = TabulatedKernel::from_values(3, ATOMS, table).unwrap();
    let parts = kernel.decompose(&measure).unwrap();
    for f in 0..ATOMS.pow(3) {
        let d = digits(f, 3);
        let sum: f64 = parts
            .iter()
            .map(|c| c.kernel.eval(&d))
            .sum();
        assert!((sum - kernel.values()[f]).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn second_moment_scales_quadratically(seed in 0u64..5000, c in -4.0f64..4.0) {
        let mut r = rng::stream(seed, 1);
        let (measure, table) = random_setup(&mut r, 2);
        let k = TabulatedKernel::from_values(2, ATOMS, table.clone()).unwrap();
        let kc = TabulatedKernel::from_values(2, ATOMS, table.iter().map(|v| c * v).collect()).unwrap();
        let a = k.second_moment(&measure).unwrap();
        let b = kc.second_moment(&measure).unwrap();
        prop_assert!((b - c * c * a).abs() < 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn variance_shrinks_with_the_binomial(seed in 0u64..5000, n in 3usize..40) {
        let mut r = rng::stream(seed, 2);
        let (measure, table) = random_setup(&mut r, 2);
        let k = TabulatedKernel::from_values(2, ATOMS, table).unwrap().degenerate_part(&measure).unwrap();
        let v = k.hoeffding_variance(&measure, n).unwrap();
        let m2 = k.second_moment(&measure).unwrap();
        prop_assert!((v * binomial(n, 2) - m2).abs() < 1e-12);
    }
}
