use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::RealMatrix;
use crate::{Error, Result};

const RIDGE: f64 = 1e-10;

/// Least-squares estimate restricted to a support, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseEstimate {
    pub values: DVector<f64>,
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    /// The support Gram matrix was singular and a ridge term was added.
    pub ridge_fallback: bool,
}

/// Indices of the `k` largest `|x_i|`, lowest index first among ties.
pub fn top_k_indices(x: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Solves `min ||y - A_S x||` through the normal equations. Returns the
/// coefficients in `support` order and whether the ridge fallback was used.
pub fn least_squares_on_support(a: &RealMatrix, y: &DVector<f64>, support: &[usize]) -> (DVector<f64>, bool) {
    if support.is_empty() {
        return (DVector::zeros(0), false);
    }
    let sub = a.select_columns(support);
    let gram = sub.transpose() * &sub;
    let rhs = sub.transpose() * y;
    let max_diag = gram.diagonal().amax();
    if let Some(chol) = Cholesky::new(gram.clone()) {
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if min_pivot > max_diag * f64::EPSILON * support.len() as f64 {
            return (chol.solve(&rhs), false);
        }
    }
    let n = support.len();
    let ridged = gram + DMatrix::identity(n, n) * (RIDGE * max_diag.max(1.0));
    let x = match Cholesky::new(ridged) {
        Some(c) => c.solve(&rhs),
        None => DVector::zeros(n),
    };
    log::warn!("singular support Gram matrix (|S| = {n}); used ridge fallback");
    (x, true)
}

fn scatter(n: usize, support: &[usize], coef: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (&i, &c) in support.iter().zip(coef.iter()) {
        out[i] = c;
    }
    out
}

fn check(a: &RealMatrix, y: &DVector<f64>, k: usize) -> Result<()> {
    if y.len() != a.nrows() {
        return Err(Error::shape(format!(
            "feedback has {} entries, projection has {} rows",
            y.len(),
            a.nrows()
        )));
    }
    if k == 0 || k > a.nrows() {
        return Err(Error::invalid(format!("sparsity must be in 1..={}, got {k}", a.nrows())));
    }
    Ok(())
}

/// Support = top-`k` magnitudes of `A^T y`; least squares on that support.
pub fn init_support_ls(a: &RealMatrix, y: &DVector<f64>, k: usize) -> Result<SparseEstimate> {
    check(a, y, k)?;
    let support = top_k_indices(&(a.transpose() * y), k);
    let (coef, ridge_fallback) = least_squares_on_support(a, y, &support);
    Ok(SparseEstimate {
        values: scatter(a.ncols(), &support, &coef),
        support,
        ridge_fallback,
    })
}

/// Orthogonal matching pursuit with at most `k` atoms. Stops early once no
/// column correlates with the residual.
pub fn omp_baseline(a: &RealMatrix, y: &DVector<f64>, k: usize) -> Result<SparseEstimate> {
    check(a, y, k)?;
    let n = a.ncols();
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let floor = 1e-12 * y.norm() * col_norms.iter().cloned().fold(0.0, f64::max);
    let mut support = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    // Orthonormal basis of the selected columns; the residual is y minus its
    // projection onto that span.
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut residual = y.clone();
    for _ in 0..k {
        let corr = a.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| !chosen[j]) {
            let c = corr[j].abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let j = match best {
            Some((j, c)) if c > floor => j,
            _ => break,
        };
        support.push(j);
        chosen[j] = true;
        let mut q = a.column(j).clone_owned();
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&q);
                q.axpy(-d, b, 1.0);
            }
        }
        let norm = q.norm();
        if norm > 1e-10 * col_norms[j] {
            q /= norm;
            let d = q.dot(&residual);
            residual.axpy(-d, &q, 1.0);
            basis.push(q);
        }
    }
    let (coef, ridge_fallback) = least_squares_on_support(a, y, &support);
    Ok(SparseEstimate {
        values: scatter(n, &support, &coef),
        support,
        ridge_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::generate_projection;
    use crate::linalg::{gaussian_matrix, OrthoMethod, SeededRng};

    fn projection(seed: u64, m: usize, n: usize) -> RealMatrix {
        generate_projection(seed, m, n, OrthoMethod::Qr).unwrap().matrix().unwrap().clone()
    }

    #[test]
    fn top_k_ties_prefer_low_index() {
        let x = DVector::from_vec(vec![1.0, -3.0, 3.0, 0.5, -3.0]);
        assert_eq!(top_k_indices(&x, 2), vec![1, 2]);
        assert_eq!(top_k_indices(&x, 4), vec![1, 2, 4, 0]);
    }

    /// Every 1-sparse signal on an 8-column, 4-row projection.
    #[test]
    fn one_sparse_exhaustive() {
        let a = projection(3, 4, 8);
        for pos in 0..8 {
            for amp in [1.0, -0.25, 7.5] {
                let mut h = DVector::zeros(8);
                h[pos] = amp;
                let y = &a * &h;
                for est in [init_support_ls(&a, &y, 1).unwrap(), omp_baseline(&a, &y, 1).unwrap()] {
                    assert_eq!(est.support, vec![pos]);
                    assert!((&est.values - &h).amax() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn zero_feedback() {
        let a = projection(4, 6, 12);
        let y = DVector::zeros(6);
        assert_eq!(init_support_ls(&a, &y, 3).unwrap().values, DVector::zeros(12));
        let omp = omp_baseline(&a, &y, 3).unwrap();
        assert_eq!(omp.values, DVector::zeros(12));
        assert!(omp.support.is_empty());
    }

    #[test]
    fn square_orthogonal_full_support() {
        let a = projection(5, 16, 16);
        let h = DVector::from_fn(16, |i, _| (i as f64 * 0.7).sin());
        let y = &a * &h;
        let est = init_support_ls(&a, &y, 16).unwrap();
        assert!((&est.values - &h).amax() < 1e-12);
        assert!((&est.values - a.transpose() * &y).amax() < 1e-12);
    }

    /// `[I I] / sqrt(2)` has many columns orthogonal to any sparse `y`;
    /// enumerate every signed 2-sparse signal over 16 columns.
    #[test]
    fn omp_support_within_correlated_columns() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = RealMatrix::from_fn(8, 16, |i, j| if j % 8 == i { s } else { 0.0 });
        for p in 0..16 {
            for q in p + 1..16 {
                for (sp, sq) in [(1.0, 1.0), (1.0, -1.0), (2.0, 0.5)] {
                    let mut h = DVector::zeros(16);
                    h[p] = sp;
                    h[q] = sq;
                    let y = &a * &h;
                    let corr = a.transpose() * &y;
                    let est = omp_baseline(&a, &y, 4).unwrap();
                    for &j in &est.support {
                        assert!(corr[j].abs() > 0.0, "p={p} q={q} picked {j}");
                    }
                    assert!((&a * &est.values - &y).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sparsity_bounds() {
        let a = projection(7, 4, 8);
        let y = DVector::zeros(4);
        assert!(init_support_ls(&a, &y, 0).is_err());
        assert!(init_support_ls(&a, &y, 5).is_err());
        assert!(omp_baseline(&a, &DVector::zeros(3), 1).is_err());
    }

    #[test]
    fn duplicate_columns_use_ridge() {
        let mut rng = SeededRng::new(8);
        let mut a = gaussian_matrix(&mut rng, 6, 10);
        let c0 = a.column(0).clone_owned();
        a.set_column(1, &c0);
        let y = a.column(0) * 2.0;
        let (x, ridge) = least_squares_on_support(&a, &y, &[0, 1]);
        assert!(ridge);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!((&a.select_columns(&[0, 1]) * &x - &y).norm() < 1e-6 * y.norm());
    }
}
