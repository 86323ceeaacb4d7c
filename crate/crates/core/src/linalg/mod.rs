//! Dense linear algebra used by the CCA baselines and the model.

mod decomp;
mod matrix;

pub use decomp::{inv_sqrt_psd, sqrt_psd, svd, sym_eig, SvdResult};
pub use matrix::{gemm, Matrix};

/// Empirical covariance `aᵀb / n` of two already-centred sample matrices.
pub fn cross_covariance(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows().max(1) as f64;
    a.t_matmul(b).scale(1.0 / n)
}

/// Subtract the per-column mean; returns the centred copy and the means.
pub fn center_columns(x: &Matrix) -> (Matrix, Vec<f64>) {
    let means = x.column_means();
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (v, m) in out.row_mut(r).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    (out, means)
}
