use crate::error::{Error, Result};
use crate::linalg::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Diagonal Gaussian per sample (row): `N(mean, diag(std²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    mean: Matrix,
    std: Matrix,
}

impl GaussianPosterior {
    pub fn new(mean: Matrix, std: Matrix) -> Result<Self> {
        if mean.shape() != std.shape() {
            return Err(Error::ShapeMismatch(format!("posterior mean {:?} vs std {:?}", mean.shape(), std.shape())));
        }
        if let Some(bad) = std.data().iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidMatrix(format!("posterior std must be positive and finite, got {bad}")));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidMatrix("posterior mean is not finite".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> &Matrix {
        &self.mean
    }

    pub fn std(&self) -> &Matrix {
        &self.std
    }

    pub fn batch(&self) -> usize {
        self.mean.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.cols()
    }

    /// Column-wise concatenation of independent blocks.
    pub fn concat(parts: &[&GaussianPosterior]) -> Result<Self> {
        let means: Vec<&Matrix> = parts.iter().map(|p| &p.mean).collect();
        let stds: Vec<&Matrix> = parts.iter().map(|p| &p.std).collect();
        Self::new(Matrix::hcat(&means)?, Matrix::hcat(&stds)?)
    }
}

/// `mean + std ⊙ noise`
pub fn reparam_sample(post: &GaussianPosterior, noise: &Matrix) -> Result<Matrix> {
    if noise.shape() != post.mean.shape() {
        return Err(Error::ShapeMismatch(format!("noise {:?} vs posterior {:?}", noise.shape(), post.mean.shape())));
    }
    let data = post.mean.data().iter().zip(post.std.data()).zip(noise.data()).map(|((m, s), e)| m + s * e).collect();
    Matrix::new(noise.rows(), noise.cols(), data)
}

/// Per-sample `Σ_d [−½ log 2π − ½ log ψ_d − (x − mean)² / (2ψ_d)]`.
pub fn gaussian_loglik(x: &Matrix, mean: &Matrix, log_psi: &[f64]) -> Result<Vec<f64>> {
    if x.shape() != mean.shape() || log_psi.len() != x.cols() {
        return Err(Error::ShapeMismatch(format!(
            "loglik: x {:?}, mean {:?}, log_psi {}",
            x.shape(),
            mean.shape(),
            log_psi.len()
        )));
    }
    let inv_psi: Vec<f64> = log_psi.iter().map(|l| (-l).exp()).collect();
    Ok((0..x.rows())
        .map(|r| {
            x.row(r)
                .iter()
                .zip(mean.row(r))
                .zip(log_psi.iter().zip(&inv_psi))
                .map(|((xv, mv), (lp, ip))| {
                    let e = xv - mv;
                    -0.5 * LN_2PI - 0.5 * lp - 0.5 * e * e * ip
                })
                .sum()
        })
        .collect())
}

/// Per-sample `KL(N(μ, σ²) ‖ N(0, I)) = Σ_k ½(μ² + σ² − 1 − 2 log σ)`.
pub fn kl_std_normal(post: &GaussianPosterior) -> Vec<f64> {
    (0..post.batch())
        .map(|r| post.mean.row(r).iter().zip(post.std.row(r)).map(|(m, s)| 0.5 * (m * m + s * s - 1.0) - s.ln()).sum())
        .collect()
}

/// Total KL of the factorized posterior: the shared term plus every private
/// term.
pub fn kl_decomposition_check(shared_kl: f64, private_kls: &[f64]) -> f64 {
    shared_kl + private_kls.iter().sum::<f64>()
}
