//! Encoding, decoding and the collapsed evidence lower bound with its exact
//! gradient.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{DiccaConfig, Fusion};
use super::params::{DiccaParams, EncoderTapes};
use super::posterior::{gaussian_loglik, kl_std_normal, reparam_sample, GaussianPosterior};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix};

fn check_views(config: &DiccaConfig, x_views: &[Matrix]) -> Result<usize> {
    if x_views.len() != config.views() {
        return Err(Error::ShapeMismatch(format!("{} views given, model has {}", x_views.len(), config.views())));
    }
    let n = x_views[0].rows();
    for (m, x) in x_views.iter().enumerate() {
        if x.rows() != n {
            return Err(Error::ShapeMismatch(format!("view {m} has {} rows, view 0 has {n}", x.rows())));
        }
        if x.cols() != config.dims[m] {
            return Err(Error::ShapeMismatch(format!(
                "view {m} has {} columns, expected {}",
                x.cols(),
                config.dims[m]
            )));
        }
    }
    Ok(n)
}

/// Input of the shared encoder.
pub fn fuse_views(config: &DiccaConfig, x_views: &[Matrix]) -> Result<Matrix> {
    match config.fusion {
        Fusion::Concat => Matrix::hcat(&x_views.iter().collect::<Vec<_>>()),
        Fusion::Sum => {
            let mut acc = x_views[0].clone();
            for x in &x_views[1..] {
                if x.shape() != acc.shape() {
                    return Err(Error::ShapeMismatch("sum fusion needs equal view widths".into()));
                }
                acc.add_assign(x);
            }
            Ok(acc)
        }
    }
}

/// Shared posterior from all views and one private posterior per view.
pub fn encode(
    config: &DiccaConfig,
    params: &DiccaParams,
    x_views: &[Matrix],
) -> Result<(GaussianPosterior, Vec<GaussianPosterior>)> {
    check_views(config, x_views)?;
    let shared = params.shared_encoder.posterior(&fuse_views(config, x_views)?)?;
    let privates =
        params.private_encoders.iter().zip(x_views).map(|(e, x)| e.posterior(x)).collect::<Result<Vec<_>>>()?;
    Ok((shared, privates))
}

/// Generator input `z·Λᵀ + z_m·Wᵀ` for view `m`.
fn generator_input(params: &DiccaParams, m: usize, z: &Matrix, z_private: &Matrix) -> Matrix {
    let lam = &params.lambda_mats[m];
    let w = &params.w_mats[m];
    let mut a = Matrix::zeros(z.rows(), lam.rows());
    gemm(1.0, z, false, lam, true, 0.0, &mut a);
    gemm(1.0, z_private, false, w, true, 1.0, &mut a);
    a
}

/// Per-view generator means `f^(m)(z·Λ^(m)ᵀ + z_m·W^(m)ᵀ)`.
pub fn decode(params: &DiccaParams, z: &Matrix, z_privates: &[Matrix]) -> Result<Vec<Matrix>> {
    if z_privates.len() != params.views() {
        return Err(Error::ShapeMismatch(format!("{} private latents for {} views", z_privates.len(), params.views())));
    }
    (0..params.views())
        .map(|m| {
            let (lam, w) = (&params.lambda_mats[m], &params.w_mats[m]);
            if z.cols() != lam.cols() || z_privates[m].cols() != w.cols() || z_privates[m].rows() != z.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "view {m}: latents {}x{} / {}x{} for Λ {:?}, W {:?}",
                    z.rows(),
                    z.cols(),
                    z_privates[m].rows(),
                    z_privates[m].cols(),
                    lam.shape(),
                    w.shape()
                )));
            }
            params.generators[m].predict(&generator_input(params, m, z, &z_privates[m]))
        })
        .collect()
}

/// Posterior-mean reconstruction of every view.
pub fn reconstruct(config: &DiccaConfig, params: &DiccaParams, x_views: &[Matrix]) -> Result<Vec<Matrix>> {
    let (shared, privates) = encode(config, params, x_views)?;
    let zp: Vec<Matrix> = privates.iter().map(|p| p.mean().clone()).collect();
    decode(params, shared.mean(), &zp)
}

/// Standard-normal draws for the reparameterization, supplied explicitly so
/// the objective is a deterministic function of its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboNoise {
    /// One `batch × K` matrix per Monte Carlo draw.
    pub shared: Vec<Matrix>,
    /// `[draw][view]`, each `batch × K_m`.
    pub private: Vec<Vec<Matrix>>,
}

impl ElboNoise {
    pub fn sample<R: Rng + ?Sized>(config: &DiccaConfig, batch: usize, rng: &mut R) -> Self {
        let mut draw = |cols: usize| Matrix::from_fn(batch, cols, |_, _| rng.sample(StandardNormal));
        let mut shared = Vec::with_capacity(config.mc_samples);
        let mut private = Vec::with_capacity(config.mc_samples);
        for _ in 0..config.mc_samples {
            shared.push(draw(config.k_shared));
            private.push(config.k_private.iter().map(|&k| draw(k)).collect());
        }
        Self { shared, private }
    }

    pub fn zeros(config: &DiccaConfig, batch: usize) -> Self {
        Self {
            shared: vec![Matrix::zeros(batch, config.k_shared); config.mc_samples],
            private: vec![config.k_private.iter().map(|&k| Matrix::zeros(batch, k)).collect(); config.mc_samples],
        }
    }

    fn draws(&self) -> usize {
        self.shared.len()
    }
}

/// Terms of the collapsed objective, each summed over the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboParts {
    /// `E_q[log p(x^m | z, z^m)]` per view, averaged over draws.
    pub recon: Vec<f64>,
    pub kl_shared: f64,
    pub kl_private: Vec<f64>,
    /// `½ Σ_m ‖θ_m‖²`
    pub theta_prior: f64,
    /// `λ Σ_{m,j} ‖Λ^(m)_{·,j}‖₂`
    pub penalty_shared: f64,
    /// `λ Σ_{m,j} ‖W^(m)_{·,j}‖₂`
    pub penalty_private: f64,
}

impl ElboParts {
    pub fn data_term(&self) -> f64 {
        self.recon.iter().sum::<f64>() - self.kl_shared - self.kl_private.iter().sum::<f64>()
    }

    pub fn value(&self) -> f64 {
        self.value_weighted(&ObjectiveWeights::FULL)
    }

    pub fn value_weighted(&self, w: &ObjectiveWeights) -> f64 {
        w.data * self.data_term()
            - w.theta_prior * self.theta_prior
            - w.group * (self.penalty_shared + self.penalty_private)
    }

    /// Group-lasso part only.
    pub fn penalty(&self) -> f64 {
        self.penalty_shared + self.penalty_private
    }
}

/// Multipliers applied to the data term, the generator prior and the
/// group-lasso penalty when forming an objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub data: f64,
    pub theta_prior: f64,
    pub group: f64,
}

impl ObjectiveWeights {
    pub const FULL: Self = Self { data: 1.0, theta_prior: 1.0, group: 1.0 };
}

fn column_norm_sum(mats: &[Matrix]) -> f64 {
    mats.iter().map(|m| (0..m.cols()).map(|j| m.column_norm(j)).sum::<f64>()).sum()
}

fn check_noise(config: &DiccaConfig, noise: &ElboNoise, n: usize) -> Result<()> {
    if noise.draws() == 0 || noise.private.len() != noise.draws() {
        return Err(Error::ShapeMismatch("noise must hold at least one draw for every block".into()));
    }
    for s in 0..noise.draws() {
        if noise.shared[s].shape() != (n, config.k_shared) || noise.private[s].len() != config.views() {
            return Err(Error::ShapeMismatch(format!("noise draw {s} has the wrong shape")));
        }
        for (m, e) in noise.private[s].iter().enumerate() {
            if e.shape() != (n, config.k_private[m]) {
                return Err(Error::ShapeMismatch(format!("noise draw {s}, view {m} has the wrong shape")));
            }
        }
    }
    Ok(())
}

/// Collapsed ELBO on a batch: reconstruction expectation minus the shared and
/// private KL terms, the generator prior and the group-lasso penalty. The
/// returned value equals `parts.value()`.
pub fn elbo(
    config: &DiccaConfig,
    params: &DiccaParams,
    x_views: &[Matrix],
    noise: &ElboNoise,
) -> Result<(f64, ElboParts)> {
    let n = check_views(config, x_views)?;
    check_noise(config, noise, n)?;
    let (shared, privates) = encode(config, params, x_views)?;
    let draws = noise.draws() as f64;
    let mut recon = vec![0.0; config.views()];
    for s in 0..noise.draws() {
        let z = reparam_sample(&shared, &noise.shared[s])?;
        let zp =
            privates.iter().zip(&noise.private[s]).map(|(p, e)| reparam_sample(p, e)).collect::<Result<Vec<_>>>()?;
        let means = decode(params, &z, &zp)?;
        for m in 0..config.views() {
            recon[m] += gaussian_loglik(&x_views[m], &means[m], &params.log_psi[m])?.iter().sum::<f64>() / draws;
        }
    }
    let parts = ElboParts {
        recon,
        kl_shared: kl_std_normal(&shared).iter().sum(),
        kl_private: privates.iter().map(|p| kl_std_normal(p).iter().sum()).collect(),
        theta_prior: params.generator_l2(),
        penalty_shared: config.lambda * column_norm_sum(&params.lambda_mats),
        penalty_private: config.lambda * column_norm_sum(&params.w_mats),
    };
    Ok((parts.value(), parts))
}

/// Value and gradient of a weighted objective.
#[derive(Debug, Clone)]
pub struct ElboGradient {
    /// `parts.value_weighted(weights)`
    pub value: f64,
    /// Unweighted terms.
    pub parts: ElboParts,
    /// Gradient of the weighted objective, shaped like the parameters.
    /// Excludes the group-lasso term unless it was requested.
    pub grad: DiccaParams,
}

/// Objective value and exact gradient with respect to every parameter.
///
/// When `penalty_gradient` is false the group-lasso term is left out of the
/// gradient (it is handled by the proximal step); its value is still
/// reported. Where requested, the gradient of a zero column is taken as zero.
pub fn elbo_grad(
    config: &DiccaConfig,
    params: &DiccaParams,
    x_views: &[Matrix],
    noise: &ElboNoise,
    weights: &ObjectiveWeights,
    penalty_gradient: bool,
) -> Result<ElboGradient> {
    let n = check_views(config, x_views)?;
    check_noise(config, noise, n)?;
    let views = config.views();
    let mut grad = params.zeros_like();

    let (shared, shared_tapes) = params.shared_encoder.forward(&fuse_views(config, x_views)?)?;
    let mut privates = Vec::with_capacity(views);
    let mut private_tapes: Vec<EncoderTapes> = Vec::with_capacity(views);
    for (enc, x) in params.private_encoders.iter().zip(x_views) {
        let (p, t) = enc.forward(x)?;
        privates.push(p);
        private_tapes.push(t);
    }

    let k = config.k_shared;
    let mut d_mu = Matrix::zeros(n, k);
    let mut d_sigma = Matrix::zeros(n, k);
    let mut d_mu_p: Vec<Matrix> = config.k_private.iter().map(|&km| Matrix::zeros(n, km)).collect();
    let mut d_sigma_p = d_mu_p.clone();

    let draws = noise.draws() as f64;
    let scale = weights.data / draws;
    let mut recon = vec![0.0; views];
    let inv_psi: Vec<Vec<f64>> = params.log_psi.iter().map(|lp| lp.iter().map(|l| (-l).exp()).collect()).collect();

    for s in 0..noise.draws() {
        let eps = &noise.shared[s];
        let z = reparam_sample(&shared, eps)?;
        let zp =
            privates.iter().zip(&noise.private[s]).map(|(p, e)| reparam_sample(p, e)).collect::<Result<Vec<_>>>()?;
        let mut dz = Matrix::zeros(n, k);
        for m in 0..views {
            let a = generator_input(params, m, &z, &zp[m]);
            let tape = params.generators[m].forward_tape(&a)?;
            let mean = tape.output();
            let x = &x_views[m];
            recon[m] += gaussian_loglik(x, mean, &params.log_psi[m])?.iter().sum::<f64>() / draws;

            let mut d_mean = Matrix::zeros(n, config.dims[m]);
            let d_logpsi = &mut grad.log_psi[m];
            for r in 0..n {
                for (((dm, xv), mv), (dl, ip)) in d_mean
                    .row_mut(r)
                    .iter_mut()
                    .zip(x.row(r))
                    .zip(mean.row(r))
                    .zip(d_logpsi.iter_mut().zip(&inv_psi[m]))
                {
                    let e = xv - mv;
                    *dm = scale * e * ip;
                    *dl += scale * (0.5 * e * e * ip - 0.5);
                }
            }
            let da = params.generators[m].backward_into(&tape, &d_mean, &mut grad.generators[m])?;
            gemm(1.0, &da, true, &z, false, 1.0, &mut grad.lambda_mats[m]);
            gemm(1.0, &da, true, &zp[m], false, 1.0, &mut grad.w_mats[m]);
            gemm(1.0, &da, false, &params.lambda_mats[m], false, 1.0, &mut dz);
            let mut dzp = Matrix::zeros(n, config.k_private[m]);
            gemm(1.0, &da, false, &params.w_mats[m], false, 0.0, &mut dzp);
            accumulate_reparam(&mut d_mu_p[m], &mut d_sigma_p[m], &dzp, &noise.private[s][m]);
        }
        accumulate_reparam(&mut d_mu, &mut d_sigma, &dz, eps);
    }

    // −KL gradients: ∂/∂μ = −μ, ∂/∂σ = −(σ − 1/σ).
    subtract_kl_grad(&mut d_mu, &mut d_sigma, &shared, weights.data);
    params.shared_encoder.backward_into(&shared_tapes, &d_mu, &d_sigma, &mut grad.shared_encoder)?;
    for m in 0..views {
        subtract_kl_grad(&mut d_mu_p[m], &mut d_sigma_p[m], &privates[m], weights.data);
        params.private_encoders[m].backward_into(
            &private_tapes[m],
            &d_mu_p[m],
            &d_sigma_p[m],
            &mut grad.private_encoders[m],
        )?;
    }

    for (g, theta) in grad.generators.iter_mut().zip(&params.generators) {
        g.axpy(-weights.theta_prior, theta);
    }

    if penalty_gradient && config.lambda > 0.0 {
        let coef = weights.group * config.lambda;
        for (g, p) in
            grad.lambda_mats.iter_mut().zip(&params.lambda_mats).chain(grad.w_mats.iter_mut().zip(&params.w_mats))
        {
            for j in 0..p.cols() {
                let norm = p.column_norm(j);
                if norm > 0.0 {
                    for r in 0..p.rows() {
                        g[(r, j)] -= coef * p[(r, j)] / norm;
                    }
                }
            }
        }
    }

    let parts = ElboParts {
        recon,
        kl_shared: kl_std_normal(&shared).iter().sum(),
        kl_private: privates.iter().map(|p| kl_std_normal(p).iter().sum()).collect(),
        theta_prior: params.generator_l2(),
        penalty_shared: config.lambda * column_norm_sum(&params.lambda_mats),
        penalty_private: config.lambda * column_norm_sum(&params.w_mats),
    };
    Ok(ElboGradient { value: parts.value_weighted(weights), parts, grad })
}

fn accumulate_reparam(d_mu: &mut Matrix, d_sigma: &mut Matrix, dz: &Matrix, eps: &Matrix) {
    for ((dm, ds), (g, e)) in
        d_mu.data_mut().iter_mut().zip(d_sigma.data_mut().iter_mut()).zip(dz.data().iter().zip(eps.data()))
    {
        *dm += g;
        *ds += g * e;
    }
}

fn subtract_kl_grad(d_mu: &mut Matrix, d_sigma: &mut Matrix, post: &GaussianPosterior, w: f64) {
    for ((dm, ds), (m, s)) in d_mu
        .data_mut()
        .iter_mut()
        .zip(d_sigma.data_mut().iter_mut())
        .zip(post.mean().data().iter().zip(post.std().data()))
    {
        *dm -= w * m;
        *ds -= w * (s - 1.0 / s);
    }
}
