//! Jacobi-based decompositions for small dense matrices.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `a = u · diag(s) · vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × p` with orthonormal columns, `p = min(rows, cols)`.
    pub u: Matrix,
    /// Singular values, non-negative and descending.
    pub s: Vec<f64>,
    /// `p × cols` with orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, s) in self.s.iter().enumerate() {
                us[(r, c)] *= s;
            }
        }
        us.matmul(&self.vt)
    }
}

fn symmetry_tolerance(a: &Matrix) -> f64 {
    1e-12 * a.max_abs().max(1.0)
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidMatrix("svd of an empty matrix".into()));
    }
    a.ensure_finite("svd input")?;
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose());
        return Ok(SvdResult { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() });
    }
    Ok(svd_tall(a))
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

fn svd_tall(a: &Matrix) -> SvdResult {
    let (m, n) = a.shape();
    // Column-major working copies.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(q);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let smax = norms[order[0]];
    let cutoff = smax * (m.max(n) as f64) * f64::EPSILON;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    let mut s = Vec::with_capacity(n);
    for (slot, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > cutoff && norms[j] > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / norms[j]).collect());
        } else {
            u_cols.push(Vec::new());
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, m);

    let u = Matrix::from_fn(m, n, |r, c| u_cols[c][r]);
    let vt = Matrix::from_fn(n, n, |r, c| v[order[r]][c]);
    SvdResult { u, s, vt }
}

/// Fill the `pending` slots with unit vectors orthogonal to every other
/// column, drawn from the standard basis by Gram-Schmidt.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize], dim: usize) {
    let mut basis = 0;
    for &slot in pending {
        loop {
            assert!(basis < dim, "orthonormal completion exhausted the basis");
            let mut cand = vec![0.0; dim];
            cand[basis] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for (k, other) in cols.iter().enumerate() {
                    if k == slot || other.is_empty() {
                        continue;
                    }
                    let proj = dot(&cand, other);
                    for (c, o) in cand.iter_mut().zip(other) {
                        *c -= proj * o;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 1e-6 {
                cols[slot] = cand.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are returned descending; eigenvector `i` is column `i`.
pub fn sym_eig(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidMatrix(format!("sym_eig needs a square matrix, got {}x{}", n, a.cols())));
    }
    a.ensure_finite("sym_eig input")?;
    let asym = a.asymmetry();
    if asym > symmetry_tolerance(a) {
        return Err(Error::InvalidMatrix(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let mut w = a.symmetrize();
    let mut v = Matrix::identity(n);

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[(p, q)].abs();
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (w[(p, p)], w[(q, q)]);
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    w[(p, q)] = 0.0;
                    w[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    w[(p, q)] = 0.0;
                    w[(q, p)] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (wkp, wkq) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let (wpk, wqk) = (w[(p, k)], w[(q, k)]);
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// `f(a) = V · diag(f(λ)) · Vᵀ` for a symmetric `a`.
fn spectral_map(values: &[f64], vectors: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for r in 0..n {
        for c in 0..n {
            scaled[(r, c)] *= f(values[c]);
        }
    }
    scaled.matmul_t(vectors).symmetrize()
}

/// Inverse square root of `a + ridge·I` for symmetric positive definite input.
pub fn inv_sqrt_psd(a: &Matrix, ridge: f64) -> Result<Matrix> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidMatrix(format!("ridge must be finite and non-negative, got {ridge}")));
    }
    let (values, vectors) = sym_eig(&a.add_diag(ridge))?;
    let min = values.last().copied().unwrap_or(f64::INFINITY);
    if min.is_nan() || min <= 1e-12 {
        return Err(Error::SingularCovariance { min_eigenvalue: min });
    }
    Ok(spectral_map(&values, &vectors, |l| 1.0 / l.sqrt()))
}

/// Symmetric square root of a positive semi-definite matrix. Eigenvalues that
/// fall slightly below zero through rounding are clamped to zero.
pub fn sqrt_psd(a: &Matrix) -> Result<Matrix> {
    let (values, vectors) = sym_eig(a)?;
    let min = values.last().copied().unwrap_or(0.0);
    if min < -1e-10 * a.max_abs().max(1.0) {
        return Err(Error::InvalidMatrix(format!("matrix is not PSD (smallest eigenvalue {min:e})")));
    }
    Ok(spectral_map(&values, &vectors, |l| l.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_orthonormal_cols(m: &Matrix, tol: f64) {
        let g = m.t_matmul(m);
        assert!(g.sub(&Matrix::identity(m.cols())).max_abs() < tol, "gram {g:?}");
    }

    #[test]
    fn svd_of_diagonal() {
        let r = svd(&Matrix::from_diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.s, vec![3.0, 2.0, 1.0]);
        for i in 0..3 {
            assert_eq!(r.u[(i, i)].abs(), 1.0);
            assert_eq!(r.vt[(i, i)].abs(), 1.0);
        }
    }

    #[test]
    fn svd_of_zero_matrix() {
        let r = svd(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(r.s, vec![0.0, 0.0]);
        assert_orthonormal_cols(&r.u, 1e-12);
    }

    #[test]
    fn svd_reconstructs_random_4x3() {
        let a = random(4, 3, 7);
        let r = svd(&a).unwrap();
        assert!(r.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm() < 1e-10);
        assert_orthonormal_cols(&r.u, 1e-10);
        assert_orthonormal_cols(&r.vt.transpose(), 1e-10);
        assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_wide_and_rank_deficient() {
        let a = random(3, 6, 11);
        let r = svd(&a).unwrap();
        assert_eq!((r.u.rows(), r.u.cols(), r.vt.rows(), r.vt.cols()), (3, 3, 3, 6));
        assert!(r.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm() < 1e-10);

        // rank one
        let x = random(5, 1, 3);
        let y = random(1, 4, 4);
        let a = x.matmul(&y);
        let r = svd(&a).unwrap();
        assert!(r.s[1] < 1e-12);
        assert_orthonormal_cols(&r.u, 1e-10);
        assert!(r.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm() < 1e-10);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let (vals, _) = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
        let (vals, vecs) = sym_eig(&Matrix::from_diag(&[5.0, -2.0])).unwrap();
        assert_eq!(vals, vec![5.0, -2.0]);
        assert_eq!(vecs, Matrix::identity(2));
    }

    #[test]
    fn eig_residuals_random_symmetric() {
        let b = random(5, 5, 21);
        let a = b.add(&b.transpose());
        let (vals, vecs) = sym_eig(&a).unwrap();
        for (i, l) in vals.iter().enumerate() {
            let v = Matrix::new(5, 1, vecs.column(i)).unwrap();
            let res = a.matmul(&v).sub(&v.scale(*l)).frobenius_norm();
            assert!(res < 1e-9, "residual {res}");
        }
        assert_orthonormal_cols(&vecs, 1e-10);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn inv_sqrt_examples() {
        assert_eq!(inv_sqrt_psd(&Matrix::identity(3), 0.0).unwrap(), Matrix::identity(3));
        let r = inv_sqrt_psd(&Matrix::from_diag(&[4.0, 9.0]), 0.0).unwrap();
        assert_eq!(r, Matrix::from_diag(&[0.5, 1.0 / 3.0]));

        let b = random(4, 4, 5);
        let a = b.t_matmul(&b);
        let r = inv_sqrt_psd(&a, 1e-6).unwrap();
        let check = r.matmul(&a.add_diag(1e-6)).matmul(&r);
        assert!(check.sub(&Matrix::identity(4)).frobenius_norm() < 1e-8);
    }

    #[test]
    fn inv_sqrt_reports_singular() {
        let a = Matrix::from_diag(&[1.0, 0.0]);
        match inv_sqrt_psd(&a, 0.0) {
            Err(Error::SingularCovariance { min_eigenvalue }) => assert_eq!(min_eigenvalue, 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(inv_sqrt_psd(&a, 1e-3).is_ok());
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let b = random(3, 3, 9);
        let a = b.t_matmul(&b);
        let r = sqrt_psd(&a).unwrap();
        assert!(r.matmul(&r).sub(&a).max_abs() < 1e-12);
    }
}
