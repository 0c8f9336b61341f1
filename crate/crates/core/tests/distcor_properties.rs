use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use robcor::distcor::{dcor, dcor_permutation_test, robust_dcor, MAX_N};
use robcor::{DataMatrix, Error};

fn gauss(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DataMatrix<f64> {
    DataMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut *rng))
}

/// Double-centered distance matrices, straight from the definition.
fn naive(x: &DataMatrix<f64>, y: &DataMatrix<f64>) -> f64 {
    let n = x.nrows();
    let center = |m: &DataMatrix<f64>| {
        let dist = |i: usize, j: usize| {
            (0..m.ncols())
                .map(|c| (m.get(i, c) - m.get(j, c)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let d: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| dist(i, j)).collect())
            .collect();
        let rm: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let g = rm.iter().sum::<f64>() / n as f64;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| d[i][j] - rm[i] - rm[j] + g)
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let (a, b) = (center(x), center(y));
    let dot = |p: &Vec<Vec<f64>>, q: &Vec<Vec<f64>>| {
        p.iter()
            .zip(q)
            .map(|(r, s)| r.iter().zip(s).map(|(u, v)| u * v).sum::<f64>())
            .sum::<f64>()
    };
    (dot(&a, &b) / (dot(&a, &a) * dot(&b, &b)).sqrt()).sqrt()
}

fn rotate(x: &DataMatrix<f64>, angle: f64, scale: f64) -> DataMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DataMatrix::from_fn(x.nrows(), 2, |i, j| {
        let (a, b) = (x.get(i, 0), x.get(i, 1));
        scale * if j == 0 { c * a - s * b } else { s * a + c * b }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn agrees_with_naive_definition(seed in 0u64..10_000, n in 5usize..40, p in 1usize..4, q in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gauss(n, p, &mut rng);
        let y = DataMatrix::from_fn(n, q, |i, j| x.get(i, j % p).powi(2) + rng.random::<f64>());
        let got = dcor(&x, &y).unwrap().dcor;
        prop_assert!((got - naive(&x, &y)).abs() < 1e-10);
    }

    #[test]
    fn plain_invariant_to_rotation_and_scale(seed in 0u64..10_000, angle in 0.0f64..6.3, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gauss(50, 2, &mut rng);
        let y = DataMatrix::from_fn(50, 1, |i, _| x.get(i, 0) * x.get(i, 1) + 0.3 * rng.random::<f64>());
        let base = dcor(&x, &y).unwrap().dcor;
        let moved = dcor(&rotate(&x, angle, scale), &y).unwrap().dcor;
        prop_assert!((base - moved).abs() < 1e-9);
    }

    #[test]
    fn robust_invariant_to_coordinate_affine_maps(seed in 0u64..10_000, a in 0.01f64..100.0, m in -100.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gauss(60, 2, &mut rng);
        let y = DataMatrix::from_fn(60, 1, |i, _| x.get(i, 1).abs() + rng.random::<f64>());
        let moved = DataMatrix::from_fn(60, 2, |i, j| if j == 0 { a * x.get(i, 0) + m } else { x.get(i, 1) / a - m });
        let base = robust_dcor(&x, &y).unwrap().dcor;
        let after = robust_dcor(&moved, &y).unwrap().dcor;
        prop_assert!((base - after).abs() < 1e-9);
    }
}

#[test]
fn single_outlier_drags_plain_dcor_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let mut x = gauss(n, 1, &mut rng);
    let mut y = gauss(n, 1, &mut rng);
    let mut last = 0.0;
    for a in [10.0, 1e2, 1e3, 1e4] {
        x.set(0, 0, a);
        y.set(0, 0, a);
        let r = dcor(&x, &y).unwrap().dcor;
        assert!(r > last, "{} at a = {}", r, a);
        last = r;
    }
    assert!(last > 0.9, "{}", last);
}

#[test]
fn same_answer_on_any_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = gauss(500, 2, &mut rng);
    let y = gauss(500, 3, &mut rng);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| dcor_permutation_test(&x, &y, 199, 7, true).unwrap())
    };
    let one = run(1);
    for t in [2, 4] {
        assert_eq!(one, run(t));
    }
}

#[test]
fn rejects_oversized_input() {
    let x = DataMatrix::from_fn(MAX_N + 1, 1, |i, _| i as f64);
    match dcor(&x, &x) {
        Err(Error::Input(msg)) => assert!(msg.contains(&MAX_N.to_string()), "{}", msg),
        other => panic!("expected an input error, got {:?}", other),
    }
}
