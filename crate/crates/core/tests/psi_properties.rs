use proptest::prelude::*;
use robcor::psi::{solve_wrapping_constants, PsiSpec};
use robcor::special::norm_pdf;

fn specs() -> Vec<PsiSpec> {
    vec![
        PsiSpec::identity(),
        PsiSpec::sign(),
        PsiSpec::sigmoid(),
        PsiSpec::huber(1.5).unwrap(),
        PsiSpec::default_wrapping(),
        PsiSpec::wrapping(1.3, 4.0).unwrap(),
        PsiSpec::wrapping(2.0, 5.0).unwrap(),
        PsiSpec::spearman(),
        PsiSpec::quadrant(),
        PsiSpec::normal_scores(),
        PsiSpec::truncated_normal_scores(0.1).unwrap(),
    ]
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #[test]
    fn odd_symmetry(z in -60.0f64..60.0) {
        for spec in specs() {
            let a = spec.eval_psi(z).unwrap();
            let b = spec.eval_psi(-z).unwrap();
            prop_assert_eq!(a, -b, "{}", spec.label());
        }
    }

    #[test]
    fn bounded_by_sup(z in -100.0f64..100.0) {
        for spec in specs() {
            prop_assert!(spec.psi(z).abs() <= spec.sup_abs() + 1e-12);
        }
    }

    #[test]
    fn derivative_matches_difference(z in -6.0f64..6.0) {
        let spec = PsiSpec::default_wrapping();
        let corners = [1.5, 4.0];
        prop_assume!(corners.iter().all(|c| (z.abs() - c).abs() > 1e-3));
        let h = 1e-6;
        let fd = (spec.psi(z + h) - spec.psi(z - h)) / (2.0 * h);
        prop_assert!((fd - spec.psi_derivative(z)).abs() < 1e-6);
    }
}

#[test]
fn wrapping_continuity_and_zero_beyond_c() {
    for (b, c) in [(1.5, 4.0), (1.3, 4.0), (2.0, 5.0)] {
        let spec = PsiSpec::wrapping(b, c).unwrap();
        for s in [1.0, -1.0] {
            let inside = spec.psi(s * b * (1.0 - 1e-12));
            let outside = spec.psi(s * b * (1.0 + 1e-12));
            assert!((inside - outside).abs() < 1e-9);
            assert!(spec.psi(s * c).abs() < 1e-10);
            assert_eq!(spec.psi(s * (c + 0.5)), 0.0);
        }
    }
}

#[test]
fn stored_constants_reintegrate() {
    let spec = PsiSpec::default_wrapping();
    let w = spec.constants().unwrap();
    // endpoints are nudged inward so each piece sees one branch of ψ′
    let tiny = 1e-12;
    let pieces = [
        (-4.0 + tiny, -1.5 - tiny),
        (-1.5 + tiny, 1.5 - tiny),
        (1.5 + tiny, 4.0 - tiny),
    ];
    let second: f64 = pieces
        .iter()
        .map(|&(a, b)| simpson(|z| spec.psi(z).powi(2) * norm_pdf(z), a, b, 20_000))
        .sum();
    let slope: f64 = pieces
        .iter()
        .map(|&(a, b)| simpson(|z| spec.psi_derivative(z) * norm_pdf(z), a, b, 20_000))
        .sum();
    assert!((second - w.second_moment).abs() < 1e-8, "{}", second);
    assert!((slope - w.mean_slope).abs() < 1e-8, "{}", slope);
}

#[test]
fn kappa_increases_with_b() {
    let ks: Vec<f64> = [1.0, 1.3, 1.5, 2.0]
        .iter()
        .map(|&b| {
            solve_wrapping_constants(b, 4.0, 1e-10)
                .unwrap()
                .constants()
                .unwrap()
                .kappa
        })
        .collect();
    assert!(ks.windows(2).all(|w| w[0] < w[1]), "{:?}", ks);
}

#[test]
fn wrapping_examples() {
    let spec = PsiSpec::default_wrapping();
    assert_eq!(spec.psi(1.0), 1.0);
    assert_eq!(spec.psi(-0.7), -0.7);
    assert_eq!(spec.psi(10.0), 0.0);
    assert!(spec.psi(3.0) > 0.0 && spec.psi(3.0) < 1.5);
}
