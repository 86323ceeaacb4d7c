use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LayerKind;

/// How the shared encoder combines the views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    /// Concatenate view features; always well-typed.
    #[default]
    Concat,
    /// Element-wise sum; every view must have the same width.
    Sum,
}

/// Encoder architecture. Each encoder is a trunk followed by a mean head and
/// a standard-deviation head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderTemplate {
    /// Private: `μ = A·relu(x) + a`, `σ = softplus(B·softplus(x) + b)`.
    /// Shared: `μ = A·x + a`, `σ = exp(B·x + b)`.
    Standard,
    /// Affine mean head and `exp` of an affine std head, no trunk.
    Linear,
    /// `depth` hidden relu layers of `width` units shared by both heads;
    /// the std head ends in softplus.
    Mlp { width: usize, depth: usize },
}

/// Generator `f^(m)` architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorTemplate {
    /// No layers; requires the generator input width to equal the view width.
    Identity,
    Linear,
    /// `f(a) = A·tanh(a) + b`
    Standard,
    /// `depth` relu layers of `width` units, then an affine output layer.
    Mlp {
        width: usize,
        depth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiccaConfig {
    /// Feature count per view.
    pub dims: Vec<usize>,
    pub k_shared: usize,
    /// Private latent width per view. All zeros means the private latents are
    /// disabled (shared-only ablation).
    pub k_private: Vec<usize>,
    /// Generator input width per view; defaults to the view width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_input_dims: Option<Vec<usize>>,
    pub lambda: f64,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default)]
    pub fusion: Fusion,
    pub encoder: EncoderTemplate,
    pub generator: GeneratorTemplate,
    /// When set, the output bias of every std head is initialized so a zero
    /// pre-activation maps to this standard deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_posterior_std: Option<f64>,
}

fn default_mc() -> usize {
    1
}

impl DiccaConfig {
    /// Config with the shipped defaults: standard encoders and
    /// generators, `λ = 1`, one Monte Carlo draw.
    pub fn new(dims: Vec<usize>, k_shared: usize, k_private: Vec<usize>) -> Self {
        Self {
            dims,
            k_shared,
            k_private,
            gen_input_dims: None,
            lambda: 1.0,
            mc_samples: 1,
            fusion: Fusion::Concat,
            encoder: EncoderTemplate::Standard,
            generator: GeneratorTemplate::Standard,
            init_posterior_std: None,
        }
    }

    pub fn views(&self) -> usize {
        self.dims.len()
    }

    pub fn gen_input_dim(&self, m: usize) -> usize {
        self.gen_input_dims.as_ref().map_or(self.dims[m], |h| h[m])
    }

    pub fn private_enabled(&self) -> bool {
        self.k_private.iter().any(|&k| k > 0)
    }

    /// Same model with private latents removed.
    pub fn without_private(&self) -> Self {
        Self { k_private: vec![0; self.views()], ..self.clone() }
    }

    pub fn shared_input_dim(&self) -> usize {
        match self.fusion {
            Fusion::Concat => self.dims.iter().sum(),
            Fusion::Sum => self.dims[0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dims.is_empty() {
            return bad("dims: at least one view is required".into());
        }
        if let Some(m) = self.dims.iter().position(|&d| d == 0) {
            return bad(format!("dims[{m}] must be >= 1"));
        }
        if self.k_shared == 0 {
            return bad("k_shared must be >= 1".into());
        }
        if self.k_private.len() != self.views() {
            return bad(format!("k_private has {} entries for {} views", self.k_private.len(), self.views()));
        }
        if self.private_enabled() {
            if let Some(m) = self.k_private.iter().position(|&k| k == 0) {
                return bad(format!("k_private[{m}] must be >= 1 (or all zero to disable private latents)"));
            }
        }
        if let Some(h) = &self.gen_input_dims {
            if h.len() != self.views() {
                return bad(format!("gen_input_dims has {} entries for {} views", h.len(), self.views()));
            }
            if let Some(m) = h.iter().position(|&x| x == 0) {
                return bad(format!("gen_input_dims[{m}] must be >= 1"));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if let Some(s) = self.init_posterior_std {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("init_posterior_std must be positive, got {s}"));
            }
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be >= 1".into());
        }
        if self.fusion == Fusion::Sum && self.dims.iter().any(|&d| d != self.dims[0]) {
            return bad("fusion = sum requires equal view widths".into());
        }
        if let EncoderTemplate::Mlp { width, depth } = self.encoder {
            if width == 0 || depth == 0 {
                return bad("encoder mlp width and depth must be >= 1".into());
            }
        }
        match self.generator {
            GeneratorTemplate::Identity => {
                for m in 0..self.views() {
                    if self.gen_input_dim(m) != self.dims[m] {
                        return bad(format!("identity generator needs gen_input_dims[{m}] == dims[{m}]"));
                    }
                }
            }
            GeneratorTemplate::Mlp { width, depth } if width == 0 || depth == 0 => {
                return bad("generator mlp width and depth must be >= 1".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Layer kinds of the generator for view `m`.
    pub fn generator_layers(&self, m: usize) -> Vec<LayerKind> {
        let (h, d) = (self.gen_input_dim(m), self.dims[m]);
        match self.generator {
            GeneratorTemplate::Identity => Vec::new(),
            GeneratorTemplate::Linear => vec![LayerKind::Affine { input: h, output: d }],
            GeneratorTemplate::Standard => vec![LayerKind::Tanh, LayerKind::Affine { input: h, output: d }],
            GeneratorTemplate::Mlp { width, depth } => {
                let mut layers = Vec::new();
                let mut input = h;
                for _ in 0..depth {
                    layers.push(LayerKind::Affine { input, output: width });
                    layers.push(LayerKind::Relu);
                    input = width;
                }
                layers.push(LayerKind::Affine { input, output: d });
                layers
            }
        }
    }

    /// `(trunk, mean head, std head)` layer kinds for an encoder reading
    /// `input` features into `k` latent dimensions.
    pub fn encoder_layers(&self, input: usize, k: usize, shared: bool) -> EncoderLayers {
        let affine = |i, o| LayerKind::Affine { input: i, output: o };
        match (self.encoder, shared) {
            (EncoderTemplate::Standard, false) => EncoderLayers {
                trunk: vec![],
                mean: vec![LayerKind::Relu, affine(input, k)],
                std: vec![LayerKind::Softplus, affine(input, k), LayerKind::Softplus],
            },
            (EncoderTemplate::Standard, true) | (EncoderTemplate::Linear, _) => EncoderLayers {
                trunk: vec![],
                mean: vec![affine(input, k)],
                std: vec![affine(input, k), LayerKind::Exp],
            },
            (EncoderTemplate::Mlp { width, depth }, _) => {
                let mut trunk = Vec::new();
                let mut i = input;
                for _ in 0..depth {
                    trunk.push(affine(i, width));
                    trunk.push(LayerKind::Relu);
                    i = width;
                }
                EncoderLayers { trunk, mean: vec![affine(width, k)], std: vec![affine(width, k), LayerKind::Softplus] }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayers {
    pub trunk: Vec<LayerKind>,
    pub mean: Vec<LayerKind>,
    pub std: Vec<LayerKind>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_fields() {
        let ok = DiccaConfig::new(vec![3, 4], 2, vec![1, 1]);
        assert!(ok.validate().is_ok());
        assert!(ok.without_private().validate().is_ok());

        let mut c = ok.clone();
        c.k_private = vec![0, 1];
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.mc_samples = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.fusion = Fusion::Sum;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.generator = GeneratorTemplate::Identity;
        c.gen_input_dims = Some(vec![3, 2]);
        assert!(c.validate().is_err());
        let mut c = ok;
        c.dims = vec![3, 0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn generator_layer_templates() {
        let mut c = DiccaConfig::new(vec![5], 2, vec![1]);
        c.gen_input_dims = Some(vec![3]);
        assert_eq!(c.generator_layers(0), vec![LayerKind::Tanh, LayerKind::Affine { input: 3, output: 5 }]);
        c.generator = GeneratorTemplate::Mlp { width: 4, depth: 2 };
        assert_eq!(c.generator_layers(0).len(), 5);
    }
}
