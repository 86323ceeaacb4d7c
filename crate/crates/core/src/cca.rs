//! Classical CCA through a whitened SVD, and the linear-Gaussian
//! probabilistic CCA model used as a sampling baseline.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center_columns, cross_covariance, inv_sqrt_psd, sqrt_psd, svd, Matrix};
use crate::rng::{stream, stream_rng};

/// Fitted two-view CCA.
///
/// Covariances use `1/N` normalization. Each canonical pair is sign-normalized
/// so the largest-magnitude entry of its `u1` column is positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcaModel {
    pub u1: Matrix,
    pub u2: Matrix,
    /// Canonical correlations, descending.
    pub correlations: Vec<f64>,
    pub means: [Vec<f64>; 2],
    pub ridge: f64,
}

/// Ridged empirical covariances of centred views.
#[derive(Debug, Clone)]
pub struct CovarianceBlocks {
    pub sigma1: Matrix,
    pub sigma2: Matrix,
    pub sigma12: Matrix,
}

impl CovarianceBlocks {
    pub fn from_centered(x1: &Matrix, x2: &Matrix, ridge: f64) -> Self {
        Self {
            sigma1: cross_covariance(x1, x1).symmetrize().add_diag(ridge),
            sigma2: cross_covariance(x2, x2).symmetrize().add_diag(ridge),
            sigma12: cross_covariance(x1, x2),
        }
    }
}

/// Whitened cross-covariance `Σ₁^{-1/2} Σ₁₂ Σ₂^{-1/2}` together with the two
/// whitening factors.
pub fn whitened_cross_covariance(blocks: &CovarianceBlocks) -> Result<(Matrix, Matrix, Matrix)> {
    let r1 = inv_sqrt_psd(&blocks.sigma1, 0.0)?;
    let r2 = inv_sqrt_psd(&blocks.sigma2, 0.0)?;
    let t = r1.matmul(&blocks.sigma12).matmul(&r2);
    Ok((t, r1, r2))
}

pub fn fit_cca(x1: &Matrix, x2: &Matrix, k: usize, ridge: f64) -> Result<CcaModel> {
    if x1.rows() != x2.rows() {
        return Err(Error::ShapeMismatch(format!("views have {} and {} samples", x1.rows(), x2.rows())));
    }
    if x1.rows() < 2 {
        return Err(Error::ShapeMismatch("CCA needs at least two samples".into()));
    }
    let (d1, d2) = (x1.cols(), x2.cols());
    if k == 0 || k > d1.min(d2) {
        return Err(Error::InvalidConfig(format!("k = {k} must be in 1..={}", d1.min(d2))));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge must be non-negative, got {ridge}")));
    }
    x1.ensure_finite("view 1")?;
    x2.ensure_finite("view 2")?;

    let (c1, m1) = center_columns(x1);
    let (c2, m2) = center_columns(x2);
    let blocks = CovarianceBlocks::from_centered(&c1, &c2, ridge);
    let (t, r1, r2) = whitened_cross_covariance(&blocks)?;
    let dec = svd(&t)?;

    let v1 = dec.u.select_cols(0..k);
    let v2 = dec.vt.transpose().select_cols(0..k);
    let mut u1 = r1.matmul(&v1);
    let mut u2 = r2.matmul(&v2);
    for j in 0..k {
        let col = u1.column(j);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, *v) } else { best })
            .1;
        if pivot < 0.0 {
            for r in 0..d1 {
                u1[(r, j)] = -u1[(r, j)];
            }
            for r in 0..d2 {
                u2[(r, j)] = -u2[(r, j)];
            }
        }
    }

    Ok(CcaModel { u1, u2, correlations: dec.s[..k].to_vec(), means: [m1, m2], ridge })
}

impl CcaModel {
    pub fn k(&self) -> usize {
        self.correlations.len()
    }

    /// `(x − mean) · U` for view 0 or 1.
    pub fn project(&self, x: &Matrix, view: usize) -> Result<Matrix> {
        let (u, mean) = match view {
            0 => (&self.u1, &self.means[0]),
            1 => (&self.u2, &self.means[1]),
            _ => return Err(Error::InvalidView { index: view, views: 2 }),
        };
        if x.cols() != u.rows() {
            return Err(Error::ShapeMismatch(format!("view {view} expects {} columns, got {}", u.rows(), x.cols())));
        }
        let mut centred = x.clone();
        for r in 0..centred.rows() {
            for (v, m) in centred.row_mut(r).iter_mut().zip(mean) {
                *v -= m;
            }
        }
        Ok(centred.matmul(u))
    }
}

pub fn project(model: &CcaModel, x: &Matrix, view: usize) -> Result<Matrix> {
    model.project(x, view)
}

/// Probabilistic CCA: `x₁ = W₁z + ε₁`, `x₂ = W₂z + ε₂`, `z ~ N(0, I)`,
/// `εᵢ ~ N(0, Ψᵢ)`. Construct-and-sample only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PccaModel {
    pub w1: Matrix,
    pub w2: Matrix,
    pub psi1: Matrix,
    pub psi2: Matrix,
}

impl PccaModel {
    pub fn new(w1: Matrix, w2: Matrix, psi1: Matrix, psi2: Matrix) -> Result<Self> {
        if w1.cols() != w2.cols() {
            return Err(Error::ShapeMismatch("W1 and W2 must share the latent dimension".into()));
        }
        for (name, w, psi) in [("psi1", &w1, &psi1), ("psi2", &w2, &psi2)] {
            if psi.rows() != w.rows() || psi.cols() != w.rows() {
                return Err(Error::ShapeMismatch(format!("{name} must be {0}x{0}", w.rows())));
            }
            if psi.asymmetry() > 1e-12 {
                return Err(Error::InvalidMatrix(format!("{name} is not symmetric")));
            }
            // sqrt_psd validates the spectrum.
            sqrt_psd(psi)?;
        }
        Ok(Self { w1, w2, psi1, psi2 })
    }

    pub fn latent_dim(&self) -> usize {
        self.w1.cols()
    }

    /// `[[W₁W₁ᵀ+Ψ₁, W₁W₂ᵀ], [W₂W₁ᵀ, W₂W₂ᵀ+Ψ₂]]`
    pub fn joint_covariance(&self) -> Matrix {
        let (d1, d2) = (self.w1.rows(), self.w2.rows());
        let b11 = self.w1.matmul_t(&self.w1).add(&self.psi1);
        let b12 = self.w1.matmul_t(&self.w2);
        let b22 = self.w2.matmul_t(&self.w2).add(&self.psi2);
        Matrix::from_fn(d1 + d2, d1 + d2, |r, c| match (r < d1, c < d1) {
            (true, true) => b11[(r, c)],
            (true, false) => b12[(r, c - d1)],
            (false, true) => b12[(c, r - d1)],
            (false, false) => b22[(r - d1, c - d1)],
        })
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<(Matrix, Matrix)> {
        let mut rng = stream_rng(seed, stream::PCCA);
        let dz = self.latent_dim();
        let z = Matrix::from_fn(n, dz, |_, _| StandardNormal.sample(&mut rng));
        let s1 = sqrt_psd(&self.psi1)?;
        let s2 = sqrt_psd(&self.psi2)?;
        let e1 = Matrix::from_fn(n, self.w1.rows(), |_, _| StandardNormal.sample(&mut rng));
        let e2 = Matrix::from_fn(n, self.w2.rows(), |_, _| StandardNormal.sample(&mut rng));
        let x1 = z.matmul_t(&self.w1).add(&e1.matmul(&s1));
        let x2 = z.matmul_t(&self.w2).add(&e2.matmul(&s2));
        Ok((x1, x2))
    }
}

pub fn pcca_joint_covariance(model: &PccaModel) -> Matrix {
    model.joint_covariance()
}

pub fn pcca_sample(model: &PccaModel, n: usize, seed: u64) -> Result<(Matrix, Matrix)> {
    model.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim_model() -> PccaModel {
        let one = Matrix::filled(1, 1, 1.0);
        PccaModel::new(one.clone(), one.clone(), one.clone(), one).unwrap()
    }

    #[test]
    fn joint_covariance_one_dimensional() {
        let c = one_dim_model().joint_covariance();
        assert_eq!(c, Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap());
    }

    #[test]
    fn zero_loadings_give_block_diagonal() {
        let psi1 = Matrix::from_diag(&[1.0, 2.0]);
        let psi2 = Matrix::from_diag(&[3.0]);
        let m = PccaModel::new(Matrix::zeros(2, 2), Matrix::zeros(1, 2), psi1, psi2).unwrap();
        let c = m.joint_covariance();
        assert_eq!(c, Matrix::from_diag(&[1.0, 2.0, 3.0]));
    }

    #[test]
    fn zero_model_samples_zero() {
        let z = Matrix::zeros(1, 1);
        let m = PccaModel::new(z.clone(), z.clone(), z.clone(), z).unwrap();
        let (a, b) = m.sample(5, 1).unwrap();
        assert!(a.data().iter().chain(b.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_is_seeded() {
        let m = one_dim_model();
        assert_eq!(m.sample(10, 4).unwrap().0, m.sample(10, 4).unwrap().0);
        assert_ne!(m.sample(10, 4).unwrap().0, m.sample(10, 5).unwrap().0);
    }

    #[test]
    fn rejects_indefinite_noise() {
        let one = Matrix::filled(1, 1, 1.0);
        let neg = Matrix::filled(1, 1, -1.0);
        assert!(PccaModel::new(one.clone(), one.clone(), neg, one).is_err());
    }

    #[test]
    fn white_population_case() {
        // Σ₁ = Σ₂ = I and Σ₁₂ = diag(0.9, 0.3) → T = Σ₁₂.
        let blocks = CovarianceBlocks {
            sigma1: Matrix::identity(2),
            sigma2: Matrix::identity(2),
            sigma12: Matrix::from_diag(&[0.9, 0.3]),
        };
        let (t, _, _) = whitened_cross_covariance(&blocks).unwrap();
        assert_eq!(t, Matrix::from_diag(&[0.9, 0.3]));
        let dec = svd(&t).unwrap();
        assert_eq!(dec.s, vec![0.9, 0.3]);
        assert_eq!(dec.u[(0, 0)].abs(), 1.0);
        assert_eq!(dec.u[(1, 1)].abs(), 1.0);
    }

    #[test]
    fn project_edge_cases() {
        let model = CcaModel {
            u1: Matrix::identity(2),
            u2: Matrix::identity(2),
            correlations: vec![1.0, 1.0],
            means: [vec![1.0, 2.0], vec![0.0, 0.0]],
            ridge: 0.0,
        };
        let at_mean = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(model.project(&at_mean, 0).unwrap().data().iter().all(|&v| v == 0.0));
        let x = Matrix::from_rows(&[vec![3.0, -1.0]]).unwrap();
        assert_eq!(model.project(&x, 1).unwrap(), x);
        assert!(matches!(model.project(&x, 2), Err(Error::InvalidView { .. })));
        assert!(matches!(model.project(&Matrix::zeros(1, 3), 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn fit_rejects_mismatched_samples() {
        let a = Matrix::zeros(5, 2);
        let b = Matrix::zeros(4, 2);
        assert!(matches!(fit_cca(&a, &b, 1, 0.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn fit_reports_singular_covariance() {
        let a = Matrix::from_fn(6, 2, |r, _| r as f64);
        let b = Matrix::from_fn(6, 2, |r, c| (r * r + c) as f64);
        assert!(matches!(fit_cca(&a, &b, 1, 0.0), Err(Error::SingularCovariance { .. })));
    }
}
