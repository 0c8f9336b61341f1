use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use robcor::linalg::truncated_svd;
use robcor::rpca::{fit_rpca, SVD_TOL};
use robcor::univariate::{fit_columns, transform_matrix};
use robcor::{DataMatrix, PsiSpec};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_data(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DataMatrix<f64> {
    let scales: Vec<f64> = (0..d).map(|j| 1.0 + j as f64).collect();
    DataMatrix::from_fn(n, d, |_, j| scales[j] * gauss(rng))
}

/// Columns sharing three latent directions of decreasing strength.
fn spiked_data(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DataMatrix<f64> {
    let load = DMatrix::from_fn(3, d, |_, _| gauss(rng));
    let f = DMatrix::from_fn(n, 3, |_, a| [3.0, 1.5, 0.7][a] * gauss(rng));
    let signal = f * load;
    DataMatrix::from_fn(n, d, |i, j| signal[(i, j)] + 0.2 * gauss(rng))
}

fn centered_transform(x: &DataMatrix<f64>, spec: &PsiSpec) -> DMatrix<f64> {
    let models = fit_columns(x, spec).unwrap();
    let t = transform_matrix(x, &models).unwrap();
    let mut a = DMatrix::from_column_slice(x.nrows(), x.ncols(), t.as_slice());
    for mut col in a.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    a
}

/// Largest principal angle (radians) between the row spaces of `a` and `b`,
/// both with orthonormal rows, from the sine of the part of `a` outside `b`.
fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let outside = a - (a * b.transpose()) * b;
    let s = outside.singular_values();
    s.iter().fold(0.0f64, |m, v| m.max(*v)).min(1.0).asin()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn loadings_orthonormal_and_values_sorted(seed in 0u64..10_000, n in 8usize..60, d in 3usize..30, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_data(n, d, &mut rng);
        let k = k.min(n.min(d));
        let model = fit_rpca(&x, &PsiSpec::default_wrapping(), k).unwrap();
        let g = &model.loadings * model.loadings.transpose();
        prop_assert!((g - DMatrix::identity(k, k)).amax() < 1e-10);
        prop_assert!(model.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn loadings_match_covariance_eigenvectors(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = spiked_data(40, 6, &mut rng);
        let spec = PsiSpec::default_wrapping();
        let k = 3;
        let model = fit_rpca(&x, &spec, k).unwrap();
        let a = centered_transform(&x, &spec);
        let cov = a.tr_mul(&a) / (a.nrows() - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let top = DMatrix::from_fn(k, 6, |r, c| eig.eigenvectors[(c, order[r])]);
        prop_assert!(max_angle(&model.loadings, &top) < 1e-8);
    }
}

#[test]
fn plane_data_recovers_plane() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, d) = (80, 7);
    let basis = DMatrix::from_fn(2, d, |_, _| gauss(&mut rng));
    let q = basis.transpose().qr().q().transpose();
    // points on a circle keep every column inside the identity region
    let coords = DMatrix::from_fn(n, 2, |i, c| {
        let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.3 * rng.random::<f64>()) / n as f64;
        0.3 * if c == 0 { t.cos() } else { t.sin() }
    });
    let center: Vec<f64> = (0..d).map(|j| j as f64).collect();
    let plane = &coords * &q;
    let x = DataMatrix::from_fn(n, d, |i, j| plane[(i, j)] + center[j]);
    let spec = PsiSpec::default_wrapping();
    let models = fit_columns(&x, &spec).unwrap();
    for (j, m) in models.iter().enumerate() {
        assert!(
            x.column(j)
                .iter()
                .all(|v| ((v - m.mu_hat) / m.s_hat).abs() < 1.5),
            "column {}",
            j
        );
    }
    let model = fit_rpca(&x, &spec, 2).unwrap();
    assert!(max_angle(&model.loadings, &q) < 1e-8);

    let on_plane = DataMatrix::from_fn(1, d, |_, j| {
        model.center[j] + 0.1 * q[(0, j)] - 0.2 * q[(1, j)]
    });
    let mask = model.residual_mask(&on_plane, 0.99);
    // one row gives zero residual scale everywhere, so nothing is masked
    assert_eq!(mask.unwrap().masked_count(), 0);
    let mean_row = DataMatrix::from_fn(1, d, |_, j| model.center[j]);
    assert!(model.scores(&mean_row).unwrap().amax() < 1e-12);

    let scores = model.scores(&x).unwrap();
    let back = scores * &model.loadings;
    let offset = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - model.center[j]);
    assert!((back - offset).amax() < 1e-8);
    assert_eq!(model.residual_mask(&x, 0.99).unwrap().masked_count(), 0);
}

#[test]
fn full_rank_reconstructs_transformed_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_data(30, 6, &mut rng);
    let spec = PsiSpec::default_wrapping();
    let model = fit_rpca(&x, &spec, 6).unwrap();
    let a = centered_transform(&x, &spec);
    let back = (&a * model.loadings.transpose()) * &model.loadings;
    assert!((back - a).amax() < 1e-8);
}

#[test]
fn scores_of_transformed_data_match_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_data(50, 8, &mut rng);
    let spec = PsiSpec::default_wrapping();
    let model = fit_rpca(&x, &spec, 3).unwrap();
    let models = fit_columns(&x, &spec).unwrap();
    let t = transform_matrix(&x, &models).unwrap();
    let scores = model.scores(&t).unwrap();
    let svd = truncated_svd(&centered_transform(&x, &spec), 3, SVD_TOL, 0).unwrap();
    let want =
        &svd.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.singular_values.clone()));
    assert!((scores - want).amax() < 1e-10);
}

#[test]
fn spikes_hurt_classical_more_than_wrapped() {
    let (n, d) = (100, 20);
    let mut wrapped_better = 0;
    let mut angles = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let dir: Vec<f64> = {
            let v: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(|a| a / norm).collect()
        };
        let t: Vec<f64> = (0..n).map(|_| 3.0 * gauss(&mut rng)).collect();
        let mut x = DataMatrix::from_fn(n, d, |i, j| t[i] * dir[j] + 0.3 * gauss(&mut rng));
        for i in 0..n / 20 {
            for _ in 0..3 {
                let j = rng.random_range(0..d);
                x.set(i, j, 60.0);
            }
        }
        let truth = DMatrix::from_row_slice(1, d, &dir);
        let w = max_angle(
            &fit_rpca(&x, &PsiSpec::default_wrapping(), 1)
                .unwrap()
                .loadings,
            &truth,
        );
        let c = max_angle(
            &fit_rpca(&x, &PsiSpec::identity(), 1).unwrap().loadings,
            &truth,
        );
        if w < c {
            wrapped_better += 1;
        }
        angles.push((w, c));
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[9] + v[10])
    };
    let mw = median(angles.iter().map(|a| a.0).collect());
    let mc = median(angles.iter().map(|a| a.1).collect());
    assert!(
        mw * 3.0 < mc,
        "median angles: wrapped {} classical {}",
        mw,
        mc
    );
    assert!(wrapped_better >= 18, "{}", wrapped_better);
}

#[test]
fn mask_shrinks_as_threshold_rises() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut x = random_data(80, 10, &mut rng);
    for i in 0..8 {
        x.set(i, i, 50.0 * (i + 1) as f64);
    }
    let model = fit_rpca(&x, &PsiSpec::default_wrapping(), 2).unwrap();
    let mut last = usize::MAX;
    for p in [0.5, 0.9, 0.99, 0.999, 0.999_999] {
        let c = model.residual_mask(&x, p).unwrap().masked_count();
        assert!(c <= last, "p = {}: {} > {}", p, c, last);
        last = c;
    }
    assert!(last >= 8);
}

#[test]
fn missing_cells_project_as_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_data(40, 5, &mut rng);
    let model = fit_rpca(&x, &PsiSpec::default_wrapping(), 2).unwrap();
    let mut row = DataMatrix::from_fn(1, 5, |_, j| x.get(3, j));
    row.set(0, 2, f64::NAN);
    let mut filled = row.clone();
    filled.set(0, 2, model.center[2]);
    assert_eq!(model.scores(&row).unwrap(), model.scores(&filled).unwrap());
}

#[test]
fn alternative_pipelines_share_the_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_data(60, 9, &mut rng);
    let base = fit_rpca(&x, &PsiSpec::default_wrapping(), 3).unwrap();
    for spec in [PsiSpec::spearman(), PsiSpec::huber(1.5).unwrap()] {
        let model = fit_rpca(&x, &spec, 3).unwrap();
        assert_eq!(model.loadings.shape(), base.loadings.shape());
        assert_eq!(model.scores(&x).unwrap().shape(), (60, 3));
        let mask = model.residual_mask(&x, 0.99).unwrap();
        assert_eq!(mask.mask.shape(), (60, 9));
    }
}
