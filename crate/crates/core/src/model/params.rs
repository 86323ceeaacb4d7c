use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{DiccaConfig, EncoderLayers};
use super::posterior::GaussianPosterior;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Layer, Network, Tape};
use crate::rng::{stream, stream_rng, StreamRng};

/// Amortized Gaussian encoder: a trunk feeding a mean head and a
/// standard-deviation head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub trunk: Network,
    pub mean: Network,
    pub std: Network,
}

pub(crate) struct EncoderTapes {
    pub trunk: Tape,
    pub mean: Tape,
    pub std: Tape,
}

impl Encoder {
    fn build(input: usize, layers: &EncoderLayers, rng: Option<&mut StreamRng>) -> Result<Self> {
        let head_in = |trunk: &Network| trunk.output_dim();
        match rng {
            Some(rng) => {
                let trunk = Network::init(input, &layers.trunk, rng)?;
                let mean = Network::init(head_in(&trunk), &layers.mean, rng)?;
                let std = Network::init(head_in(&trunk), &layers.std, rng)?;
                Ok(Self { trunk, mean, std })
            }
            None => {
                let trunk = Network::zeros(input, &layers.trunk)?;
                let mean = Network::zeros(head_in(&trunk), &layers.mean)?;
                let std = Network::zeros(head_in(&trunk), &layers.std)?;
                Ok(Self { trunk, mean, std })
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { trunk: self.trunk.zeros_like(), mean: self.mean.zeros_like(), std: self.std.zeros_like() }
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mean.output_dim()
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Result<(GaussianPosterior, EncoderTapes)> {
        let trunk = self.trunk.forward_tape(x)?;
        let mean = self.mean.forward_tape(trunk.output())?;
        let std = self.std.forward_tape(trunk.output())?;
        let post = GaussianPosterior::new(mean.output().clone(), std.output().clone())?;
        Ok((post, EncoderTapes { trunk, mean, std }))
    }

    pub fn posterior(&self, x: &Matrix) -> Result<GaussianPosterior> {
        Ok(self.forward(x)?.0)
    }

    /// Backpropagate head gradients into `grads`; returns the input gradient.
    pub(crate) fn backward_into(
        &self,
        tapes: &EncoderTapes,
        d_mean: &Matrix,
        d_std: &Matrix,
        grads: &mut Encoder,
    ) -> Result<Matrix> {
        let mut d_trunk = self.mean.backward_into(&tapes.mean, d_mean, &mut grads.mean)?;
        d_trunk.add_assign(&self.std.backward_into(&tapes.std, d_std, &mut grads.std)?);
        self.trunk.backward_into(&tapes.trunk, &d_trunk, &mut grads.trunk)
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.trunk.tensors();
        t.extend(self.mean.tensors());
        t.extend(self.std.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.trunk.tensors_mut();
        t.extend(self.mean.tensors_mut());
        t.extend(self.std.tensors_mut());
        t
    }

    fn tensor_names(&self, prefix: &str) -> Vec<String> {
        let mut t = self.trunk.tensor_names(&format!("{prefix}.trunk"));
        t.extend(self.mean.tensor_names(&format!("{prefix}.mean")));
        t.extend(self.std.tensor_names(&format!("{prefix}.std")));
        t
    }

    /// Set the std head's output bias so a zero pre-activation gives `std`.
    fn set_std_bias(&mut self, std: f64) {
        let bias_value = match self.std.layers().last() {
            Some(Layer::Exp) => std.ln(),
            Some(Layer::Softplus) => std + (-(-std).exp_m1()).ln(),
            _ => std,
        };
        if let Some(Layer::Affine { bias, .. }) =
            self.std.layers_mut().iter_mut().rev().find(|l| matches!(l, Layer::Affine { .. }))
        {
            bias.iter_mut().for_each(|b| *b = bias_value);
        }
    }

    /// Reorder the output units of both heads.
    fn permute_outputs(&mut self, perm: &[usize]) -> Result<()> {
        for head in [&mut self.mean, &mut self.std] {
            let layer = head
                .layers_mut()
                .iter_mut()
                .rev()
                .find(|l| matches!(l, Layer::Affine { .. }))
                .ok_or_else(|| Error::InvalidConfig("encoder head has no affine layer".into()))?;
            if let Layer::Affine { weight, bias } = layer {
                let w = weight.clone();
                let b = bias.clone();
                for (new, &old) in perm.iter().enumerate() {
                    weight.set_column(new, &w.column(old));
                    bias[new] = b[old];
                }
            }
        }
        Ok(())
    }
}

/// Which optimizer treats a parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Columns of Λ^(m) and W^(m): proximal gradient steps.
    LatentToGroup,
    Generator,
    NoiseVariance,
    Encoder,
}

/// All learnable state of the model.
///
/// Parameter order (shared by gradients, optimizer state and the model
/// container): for each view `Λ^(m)` then `W^(m)`; every generator; every
/// `log ψ^(m)`; the shared encoder (trunk, mean head, std head); then each
/// private encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiccaParams {
    /// `h_m × K`
    pub lambda_mats: Vec<Matrix>,
    /// `h_m × K_m`
    pub w_mats: Vec<Matrix>,
    pub generators: Vec<Network>,
    /// Per-feature log noise variance; `Ψ^(m) = diag(exp(log_psi[m]))`.
    pub log_psi: Vec<Vec<f64>>,
    pub shared_encoder: Encoder,
    pub private_encoders: Vec<Encoder>,
}

impl DiccaParams {
    /// Fresh parameters drawn from the `PARAM_INIT` stream of `seed`.
    pub fn init(config: &DiccaConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, stream::PARAM_INIT);
        Self::build(config, Some(&mut rng))
    }

    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &DiccaConfig) -> Result<Self> {
        config.validate()?;
        Self::build(config, None)
    }

    fn build(config: &DiccaConfig, mut rng: Option<&mut StreamRng>) -> Result<Self> {
        let m_views = config.views();
        let mut lambda_mats = Vec::with_capacity(m_views);
        let mut w_mats = Vec::with_capacity(m_views);
        for m in 0..m_views {
            let h = config.gen_input_dim(m);
            for (k, out) in [(config.k_shared, &mut lambda_mats), (config.k_private[m], &mut w_mats)] {
                let mut mat = Matrix::zeros(h, k);
                if let Some(rng) = rng.as_deref_mut() {
                    let bound = (6.0 / (h + k) as f64).sqrt();
                    for v in mat.data_mut() {
                        *v = rng.random_range(-bound..=bound);
                    }
                }
                out.push(mat);
            }
        }
        let mut generators = Vec::with_capacity(m_views);
        for m in 0..m_views {
            let kinds = config.generator_layers(m);
            let net = match rng.as_deref_mut() {
                Some(rng) => Network::init(config.gen_input_dim(m), &kinds, rng)?,
                None => Network::zeros(config.gen_input_dim(m), &kinds)?,
            };
            generators.push(net);
        }
        let log_psi = config.dims.iter().map(|&d| vec![0.0; d]).collect();
        let shared_layers = config.encoder_layers(config.shared_input_dim(), config.k_shared, true);
        let shared_encoder = Encoder::build(config.shared_input_dim(), &shared_layers, rng.as_deref_mut())?;
        let mut private_encoders = Vec::with_capacity(m_views);
        for m in 0..m_views {
            let layers = config.encoder_layers(config.dims[m], config.k_private[m], false);
            private_encoders.push(Encoder::build(config.dims[m], &layers, rng.as_deref_mut())?);
        }
        let mut params = Self { lambda_mats, w_mats, generators, log_psi, shared_encoder, private_encoders };
        if let (Some(std), true) = (config.init_posterior_std, rng.is_some()) {
            params.shared_encoder.set_std_bias(std);
            params.private_encoders.iter_mut().for_each(|e| e.set_std_bias(std));
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            lambda_mats: self.lambda_mats.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect(),
            w_mats: self.w_mats.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect(),
            generators: self.generators.iter().map(Network::zeros_like).collect(),
            log_psi: self.log_psi.iter().map(|v| vec![0.0; v.len()]).collect(),
            shared_encoder: self.shared_encoder.zeros_like(),
            private_encoders: self.private_encoders.iter().map(Encoder::zeros_like).collect(),
        }
    }

    pub fn views(&self) -> usize {
        self.lambda_mats.len()
    }

    /// Check that the parameter shapes are the ones `config` implies.
    pub fn check_against(&self, config: &DiccaConfig) -> Result<()> {
        let expected = Self::zeros(config)?;
        let shapes = |p: &DiccaParams| p.tensors().iter().map(|(_, t)| t.len()).collect::<Vec<_>>();
        let same_layers = self.generators.iter().zip(&expected.generators).all(|(a, b)| a.kinds() == b.kinds())
            && self.generators.len() == expected.generators.len();
        if shapes(self) != shapes(&expected)
            || !same_layers
            || self.lambda_mats.iter().zip(&expected.lambda_mats).any(|(a, b)| a.shape() != b.shape())
            || self.w_mats.iter().zip(&expected.w_mats).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::ShapeMismatch("parameters do not match the model config".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(ParamGroup, &[f64])> {
        let mut out = Vec::new();
        for (l, w) in self.lambda_mats.iter().zip(&self.w_mats) {
            out.push((ParamGroup::LatentToGroup, l.data()));
            out.push((ParamGroup::LatentToGroup, w.data()));
        }
        for g in &self.generators {
            out.extend(g.tensors().into_iter().map(|t| (ParamGroup::Generator, t)));
        }
        for p in &self.log_psi {
            out.push((ParamGroup::NoiseVariance, p.as_slice()));
        }
        out.extend(self.shared_encoder.tensors().into_iter().map(|t| (ParamGroup::Encoder, t)));
        for e in &self.private_encoders {
            out.extend(e.tensors().into_iter().map(|t| (ParamGroup::Encoder, t)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(ParamGroup, &mut [f64])> {
        let mut out = Vec::new();
        for (l, w) in self.lambda_mats.iter_mut().zip(self.w_mats.iter_mut()) {
            out.push((ParamGroup::LatentToGroup, l.data_mut()));
            out.push((ParamGroup::LatentToGroup, w.data_mut()));
        }
        for g in &mut self.generators {
            out.extend(g.tensors_mut().into_iter().map(|t| (ParamGroup::Generator, t)));
        }
        for p in &mut self.log_psi {
            out.push((ParamGroup::NoiseVariance, p.as_mut_slice()));
        }
        out.extend(self.shared_encoder.tensors_mut().into_iter().map(|t| (ParamGroup::Encoder, t)));
        for e in &mut self.private_encoders {
            out.extend(e.tensors_mut().into_iter().map(|t| (ParamGroup::Encoder, t)));
        }
        out
    }

    /// Human-readable paths aligned with [`DiccaParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in 0..self.views() {
            out.push(format!("lambda[{m}]"));
            out.push(format!("w[{m}]"));
        }
        for (m, g) in self.generators.iter().enumerate() {
            out.extend(g.tensor_names(&format!("generator[{m}]")));
        }
        for m in 0..self.log_psi.len() {
            out.push(format!("log_psi[{m}]"));
        }
        out.extend(self.shared_encoder.tensor_names("shared_encoder"));
        for (m, e) in self.private_encoders.iter().enumerate() {
            out.extend(e.tensor_names(&format!("private_encoder[{m}]")));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `½ Σ_m ‖θ_m‖²` over generator parameters.
    pub fn generator_l2(&self) -> f64 {
        self.generators.iter().map(Network::param_l2).sum()
    }

    /// Relabel shared latent dimensions: new dimension `i` is old dimension
    /// `perm[i]`. Applied to every Λ^(m) and to the shared encoder heads, so
    /// the model's objective is unchanged.
    pub fn permute_shared_latents(&self, perm: &[usize]) -> Result<Self> {
        let k = self.shared_encoder.latent_dim();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidIndex(format!("{perm:?} is not a permutation of 0..{k}")));
        }
        let mut out = self.clone();
        for (new_l, old_l) in out.lambda_mats.iter_mut().zip(&self.lambda_mats) {
            for (new, &old) in perm.iter().enumerate() {
                new_l.set_column(new, &old_l.column(old));
            }
        }
        out.shared_encoder.permute_outputs(perm)?;
        Ok(out)
    }
}
