//! Deep interpretable variational CCA.
//!
//! A multi-view latent variable model with one latent block shared by all
//! views and one private block per view. Each view is generated from its
//! latents through a latent-to-group matrix and a small network; a
//! group-lasso penalty on the columns of those matrices switches latent
//! dimensions off per view. Inference is amortized with Gaussian encoders and
//! training maximizes the collapsed evidence lower bound with Adam plus
//! proximal steps.
//!
//! Classical CCA and a probabilistic CCA sampler are included as baselines.

pub mod cca;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rng;

pub use cca::{fit_cca, CcaModel, PccaModel};
pub use data::{MultiViewDataset, PlantedStructure, PlantedTruth};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{GroupDependency, SupportMask};
pub use model::{DiccaConfig, DiccaParams};
pub use optim::{train, ProxConfig, TrainOptions, TrainReport};
