//! Dense linear algebra helpers on top of nalgebra.
//!
//! Cross products stay in the storage type; eigen- and singular-value
//! decompositions run in `f64`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column-major `n × d` slice as an nalgebra matrix.
pub fn to_dmatrix<T: Scalar>(n: usize, d: usize, col_major: &[T]) -> DMatrix<T> {
    DMatrix::from_column_slice(n, d, col_major)
}

pub fn to_f64<T: Scalar>(m: &DMatrix<T>) -> DMatrix<f64> {
    m.map(|v| v.as_f64())
}

/// Center each column and scale it to unit Euclidean norm.
///
/// Returns the normalized matrix together with the column means and norms.
/// A column whose centered norm is zero is reported by index.
pub fn center_unit_columns<T: Scalar>(
    m: &mut DMatrix<T>,
) -> std::result::Result<(Vec<T>, Vec<T>), usize> {
    let n = m.nrows();
    let mut means = Vec::with_capacity(m.ncols());
    let mut norms = Vec::with_capacity(m.ncols());
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let amp = col.iter().fold(0.0f64, |a, v| a.max(v.as_f64().abs()));
        let mean = col.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
        let mean_t = T::lit(mean);
        let mut ss = 0.0;
        for v in col.iter_mut() {
            *v -= mean_t;
            ss += v.as_f64() * v.as_f64();
        }
        let norm = ss.sqrt();
        // a constant column leaves only rounding noise after centering
        if !(norm > 1e-12 * amp * (n as f64).sqrt()) {
            return Err(j);
        }
        let inv = T::lit(1.0 / norm);
        for v in col.iter_mut() {
            *v *= inv;
        }
        means.push(mean_t);
        norms.push(T::lit(norm));
    }
    Ok((means, norms))
}

/// `ZᵀZ` made exactly symmetric, with unit diagonal and entries clipped to [−1, 1].
pub fn unit_gram<T: Scalar>(z: &DMatrix<T>) -> DMatrix<T> {
    let mut r = z.tr_mul(z);
    let d = r.nrows();
    for j in 0..d {
        r[(j, j)] = T::one();
        for i in 0..j {
            let v = T::lit(0.5) * (r[(i, j)] + r[(j, i)]);
            let v = v.max(-T::one()).min(T::one());
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// decreasing order.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Inverse square root factor `W` with `WᵀW = M⁻¹` for a symmetric positive
/// definite `M`, rows scaled eigenvectors. Fails when the smallest eigenvalue
/// is below `rel_floor` times the largest.
pub fn whitening(m: &DMatrix<f64>, rel_floor: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen(m);
    let max = values.max();
    let min = values.min();
    if !(max > 0.0) || !(min > rel_floor * max) {
        return Err(Error::Singular {
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    let mut w = vectors.transpose();
    for (i, mut row) in w.row_iter_mut().enumerate() {
        row /= values[i].sqrt();
    }
    Ok(w)
}

/// Top singular triplets of a dense matrix.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `n × k` left singular vectors.
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `k × d` right singular vectors as rows.
    pub vt: DMatrix<f64>,
    pub iterations: usize,
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn full_thin_svd(a: &DMatrix<f64>, k: usize) -> TruncatedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    order.truncate(k);
    TruncatedSvd {
        u: DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>()),
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        vt: DMatrix::from_rows(&order.iter().map(|&i| vt.row(i)).collect::<Vec<_>>()),
        iterations: 0,
    }
}

/// Top-`k` singular triplets by randomized subspace iteration.
///
/// Iterates until every Ritz pair satisfies
/// `‖AᵀA v − σ² v‖ ≤ tol · σ₁²`, falling back to a dense SVD when the
/// oversampled subspace already spans the smaller dimension.
pub fn truncated_svd(a: &DMatrix<f64>, k: usize, tol: f64, seed: u64) -> Result<TruncatedSvd> {
    let (n, d) = a.shape();
    let r = n.min(d);
    if k == 0 || k > r {
        return Err(Error::Input(format!(
            "component count {} must lie in 1..={}",
            k, r
        )));
    }
    let l = (k + 10).max(2 * k);
    if l >= r {
        return Ok(full_thin_svd(a, k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(d, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(a * omega);
    let max_iter = 300;
    for it in 1..=max_iter {
        let v = orthonormalize(a.tr_mul(&q));
        q = orthonormalize(a * &v);
        // Rayleigh–Ritz on the current subspace
        let b = q.tr_mul(a);
        let small = full_thin_svd(&b, k);
        let vt = small.vt;
        let sigma = small.singular_values;
        let av = a * vt.transpose();
        let atav = a.tr_mul(&av);
        let top = sigma[0] * sigma[0];
        let converged = (0..k).all(|i| {
            let resid = atav.column(i) - vt.row(i).transpose() * (sigma[i] * sigma[i]);
            resid.norm() <= tol * top.max(f64::MIN_POSITIVE)
        });
        if converged || it == max_iter {
            if !converged {
                log::warn!(
                    "truncated SVD stopped after {} iterations without reaching tolerance {:e}",
                    it,
                    tol
                );
            }
            return Ok(TruncatedSvd {
                u: &q * small.u,
                singular_values: sigma,
                vt,
                iterations: it,
            });
        }
    }
    unreachable!("loop returns on the last iteration")
}
