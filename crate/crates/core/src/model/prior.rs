use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::config::DiccaConfig;
use super::elbo::decode;
use super::params::DiccaParams;
use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{stream, stream_rng};

/// Hierarchical column prior: `γ² ~ Gamma(shape = (h+1)/2, rate = λ²/2)` and
/// `column ~ N(0, γ² I)`, where `h` is the column length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityPrior {
    pub lambda: f64,
    pub column_len: usize,
}

impl SparsityPrior {
    pub fn new(lambda: f64, column_len: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("sparsity prior needs λ > 0, got {lambda}")));
        }
        if column_len == 0 {
            return Err(Error::InvalidConfig("column length must be >= 1".into()));
        }
        Ok(Self { lambda, column_len })
    }

    pub fn shape(&self) -> f64 {
        (self.column_len as f64 + 1.0) / 2.0
    }

    pub fn rate(&self) -> f64 {
        self.lambda * self.lambda / 2.0
    }

    pub fn sample_gamma_sq<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape(), 1.0 / self.rate()).expect("validated parameters").sample(rng)
    }

    /// Draw `γ²` and a column from the prior.
    pub fn sample_column<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Vec<f64>) {
        let g2 = self.sample_gamma_sq(rng);
        let sd = g2.sqrt();
        let col = (0..self.column_len).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        (g2, col)
    }
}

/// Output of [`sample_generative`].
#[derive(Debug, Clone)]
pub struct GenerativeSample {
    pub dataset: MultiViewDataset,
    /// Parameters the views were generated from (with prior-drawn Λ, W when
    /// requested).
    pub params: DiccaParams,
    /// `γ²` per view and column of Λ^(m), then of W^(m); empty unless the
    /// weights were drawn from the prior.
    pub gamma_sq: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Ancestral sampling from the generative model.
pub fn sample_generative(
    config: &DiccaConfig,
    params: &DiccaParams,
    n: usize,
    seed: u64,
    sample_prior_weights: bool,
) -> Result<GenerativeSample> {
    config.validate()?;
    params.check_against(config)?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be >= 1".into()));
    }
    if sample_prior_weights && config.lambda <= 0.0 {
        return Err(Error::InvalidConfig("drawing weights from the prior needs λ > 0".into()));
    }
    let mut rng = stream_rng(seed, stream::GENERATIVE);
    let mut params = params.clone();
    let mut gamma_sq = Vec::new();
    if sample_prior_weights {
        for m in 0..config.views() {
            let prior = SparsityPrior::new(config.lambda, config.gen_input_dim(m))?;
            let mut draw = |mat: &mut Matrix| {
                (0..mat.cols())
                    .map(|j| {
                        let (g2, col) = prior.sample_column(&mut rng);
                        mat.set_column(j, &col);
                        g2
                    })
                    .collect::<Vec<_>>()
            };
            let gl = draw(&mut params.lambda_mats[m]);
            let gw = draw(&mut params.w_mats[m]);
            gamma_sq.push((gl, gw));
        }
    }
    let z = Matrix::from_fn(n, config.k_shared, |_, _| rng.sample(StandardNormal));
    let zp: Vec<Matrix> =
        config.k_private.iter().map(|&k| Matrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))).collect();
    let means = decode(&params, &z, &zp)?;
    let views = means
        .into_iter()
        .zip(&params.log_psi)
        .map(|(mut mean, log_psi)| {
            let sd: Vec<f64> = log_psi.iter().map(|l| (0.5 * l).exp()).collect();
            for r in 0..n {
                for (v, s) in mean.row_mut(r).iter_mut().zip(&sd) {
                    *v += s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            mean
        })
        .collect();
    let dataset = MultiViewDataset::new(views, None)?.with_provenance(format!("generative sample, seed {seed}"));
    Ok(GenerativeSample { dataset, params, gamma_sq })
}
