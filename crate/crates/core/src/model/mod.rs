//! The multi-view generative model with shared and view-specific latents,
//! its amortized Gaussian posteriors and the collapsed group-lasso ELBO.

mod config;
mod elbo;
mod gradcheck;
mod params;
mod posterior;
mod prior;

pub use config::{DiccaConfig, EncoderLayers, EncoderTemplate, Fusion, GeneratorTemplate};
pub use elbo::{
    decode, elbo, elbo_grad, encode, fuse_views, reconstruct, ElboGradient, ElboNoise, ElboParts, ObjectiveWeights,
};
pub use gradcheck::{check_gradient, GradCheckReport};
pub use params::{DiccaParams, Encoder, ParamGroup};
pub use posterior::{gaussian_loglik, kl_decomposition_check, kl_std_normal, reparam_sample, GaussianPosterior};
pub use prior::{sample_generative, GenerativeSample, SparsityPrior};
