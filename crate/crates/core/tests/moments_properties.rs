use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use robcor::moments::{scatter_matrix, transformed_correlation};
use robcor::{DataMatrix, PsiSpec};

fn noisy(n: usize, d: usize, seed: u64) -> DataMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DataMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    for j in 0..d {
        for i in 0..n {
            let u: f64 = rng.random();
            if u < 0.05 {
                x.set(i, j, f64::NAN);
            } else if u < 0.15 {
                x.set(i, j, rng.random_range(-50.0..50.0));
            }
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn always_psd(seed in 0u64..100_000, n in 10usize..60, d in 2usize..90) {
        let x = noisy(n, d, seed);
        let m = scatter_matrix(&x, &PsiSpec::default_wrapping()).unwrap();
        prop_assert!(m.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn column_permutation_equivariance(seed in 0u64..100_000) {
        let x = noisy(40, 6, seed);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let y = x.select_columns(&perm);
        let spec = PsiSpec::default_wrapping();
        let rx = scatter_matrix(&x, &spec).unwrap().correlation;
        let ry = scatter_matrix(&y, &spec).unwrap().correlation;
        for a in 0..6 {
            for b in 0..6 {
                prop_assert!((ry[(a, b)] - rx[(perm[a], perm[b])]).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn independent_heavy_tails_have_small_correlation() {
    let t1 = StudentT::new(1.0).unwrap();
    let n = 200;
    let bound = 3.0 / (n as f64).sqrt();
    let spec = PsiSpec::default_wrapping();
    let mut inside = 0;
    for rep in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(rep);
        let x: Vec<f64> = (0..n).map(|_| t1.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| t1.sample(&mut rng)).collect();
        if transformed_correlation(&x, &y, &spec).unwrap().abs() < bound {
            inside += 1;
        }
    }
    assert!(inside >= 198, "{}", inside);
}

#[test]
fn unit_correlation_means_central_points_are_collinear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
    // far outliers on the same line are wrapped onto the center of both coordinates
    x[5] = 80.0;
    y[5] = 3.0 - 160.0;
    x[17] = -60.0;
    y[17] = 3.0 + 120.0;
    let spec = PsiSpec::default_wrapping();
    let r = transformed_correlation(&x, &y, &spec).unwrap();
    assert!((r.abs() - 1.0).abs() < 1e-9, "{}", r);
    let mx = robcor::univariate::fit_column(&x, &spec, "x").unwrap();
    let my = robcor::univariate::fit_column(&y, &spec, "y").unwrap();
    let central: Vec<(f64, f64)> = x
        .iter()
        .zip(&y)
        .filter(|(a, b)| {
            ((*a - mx.mu_hat) / mx.s_hat).abs() <= 1.5 && ((*b - my.mu_hat) / my.s_hat).abs() <= 1.5
        })
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = central.len() as f64;
    let (ma, mb) = central
        .iter()
        .fold((0.0, 0.0), |(s, t), (a, b)| (s + a / n, t + b / n));
    let sab: f64 = central.iter().map(|(a, b)| (a - ma) * (b - mb)).sum();
    let saa: f64 = central.iter().map(|(a, _)| (a - ma).powi(2)).sum();
    let slope = sab / saa;
    let worst = central
        .iter()
        .map(|(a, b)| (b - mb - slope * (a - ma)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-7, "{}", worst);
}

#[test]
fn f32_matches_f64() {
    let x = noisy(80, 5, 3);
    let x32: DataMatrix<f32> = x.cast();
    let spec = PsiSpec::default_wrapping();
    let r64 = scatter_matrix(&x, &spec).unwrap().correlation;
    let r32 = scatter_matrix(&x32, &spec).unwrap().correlation;
    for (a, b) in r64.iter().zip(r32.iter()) {
        assert!((a - *b as f64).abs() < 1e-4);
    }
}
