use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};

use robcor::univariate::{fit_column, wrap_column};
use robcor::PsiSpec;

fn sample(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StudentT::new(3.0).unwrap();
    (0..n).map(|_| t.sample(&mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrap_is_location_scale_equivariant(seed in 0u64..10_000, a in 0.01f64..100.0, m in -1e3f64..1e3) {
        let spec = PsiSpec::default_wrapping();
        let x = sample(60, seed);
        let y: Vec<f64> = x.iter().map(|v| a * v + m).collect();
        let wx = wrap_column(&x, &fit_column(&x, &spec, "x").unwrap());
        let wy = wrap_column(&y, &fit_column(&y, &spec, "y").unwrap());
        for (u, v) in wx.iter().zip(&wy) {
            let want = a * u + m;
            prop_assert!((v - want).abs() <= 1e-9 * (1.0 + want.abs()), "{} vs {}", v, want);
        }
    }

    #[test]
    fn core_unchanged_and_tails_bounded(seed in 0u64..10_000) {
        let spec = PsiSpec::default_wrapping();
        let x = sample(80, seed);
        let model = fit_column(&x, &spec, "x").unwrap();
        let w = wrap_column(&x, &model);
        let (mu, s) = (model.mu_hat, model.s_hat);
        for (orig, wrapped) in x.iter().zip(&w) {
            let z = (orig - mu) / s;
            if z.abs() <= 1.5 {
                prop_assert!((wrapped - orig).abs() <= 1e-12 * (1.0 + orig.abs()));
            }
            prop_assert!(*wrapped >= mu - 1.5 * s - 1e-12 && *wrapped <= mu + 1.5 * s + 1e-12);
        }
    }
}

#[test]
fn missing_cells_wrap_to_location() {
    let spec = PsiSpec::default_wrapping();
    let mut x = sample(30, 1);
    x[4] = f64::NAN;
    let model = fit_column(&x, &spec, "x").unwrap();
    assert_eq!(model.n_missing, 1);
    assert_eq!(wrap_column(&x, &model)[4], model.mu_hat);
}

#[test]
fn single_precision_fits() {
    let x: Vec<f32> = sample(100, 2).into_iter().map(|v| v as f32).collect();
    let spec = PsiSpec::default_wrapping();
    let m32 = fit_column(&x, &spec, "x").unwrap();
    let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let m64 = fit_column(&x64, &spec, "x").unwrap();
    assert!((m32.mu_hat as f64 - m64.mu_hat).abs() < 1e-5);
    assert!((m32.s_hat as f64 - m64.s_hat).abs() < 1e-5);
}
