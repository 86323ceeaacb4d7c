//! TOML run configuration.
//!
//! ```toml
//! seed = 0
//!
//! [model]
//! k_shared = 30
//! k_private = 30            # one value for every view, or a list
//! lambda = 1.0
//! encoder = { kind = "standard" }
//! generator = { kind = "standard" }
//!
//! [train]
//! lr = 1e-4
//! lr_w = 1e-4
//! epochs = 100
//! batch_size = 128
//!
//! [ablation]
//! disable_private = false
//! lambda_zero = false
//!
//! [data]
//! manifest = "data/dataset.toml"   # relative to this file
//!
//! [simulate]
//! n = 2000
//! dims = [20, 20, 20]
//! noise_std = 0.2
//! inactive_shared = [[1, 3], [1, 4]]   # 1-based [view, latent]
//! ```

use std::path::{Path, PathBuf};

use dicca_core::data::PlantedGenerator;
use dicca_core::model::{DiccaConfig, EncoderTemplate, Fusion, GeneratorTemplate};
use dicca_core::optim::{ProxConfig, TrainOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One value shared by every view, or one per view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerView {
    All(usize),
    Each(Vec<usize>),
}

impl PerView {
    fn expand(&self, views: usize, field: &str) -> CliResult<Vec<usize>> {
        match self {
            PerView::All(v) => Ok(vec![*v; views]),
            PerView::Each(v) if v.len() == views => Ok(v.clone()),
            PerView::Each(v) => Err(CliError::Config(format!("{field}: {} entries for {views} views", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub k_shared: usize,
    pub k_private: PerView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen_input_dims: Option<PerView>,
    pub lambda: f64,
    pub mc_samples: usize,
    pub fusion: Fusion,
    pub encoder: EncoderTemplate,
    pub generator: GeneratorTemplate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_posterior_std: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            k_shared: 30,
            k_private: PerView::All(30),
            gen_input_dims: None,
            lambda: 1.0,
            mc_samples: 1,
            fusion: Fusion::Concat,
            encoder: EncoderTemplate::Standard,
            generator: GeneratorTemplate::Standard,
            init_posterior_std: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub lr_w: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainOptions::default();
        Self { lr: d.lr, lr_w: d.prox.lr_w, epochs: d.epochs, batch_size: d.batch_size, warmup_epochs: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSection {
    /// Drop the view-specific latents (shared-only model).
    pub disable_private: bool,
    /// Force λ = 0, switching the group-lasso shrinkage off.
    pub lambda_zero: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationSource {
    /// Unit-norm loadings with a user-chosen column support.
    #[default]
    Planted,
    /// Ancestral sampling from the model, loadings drawn from the sparsity prior.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub source: SimulationSource,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub generator: PlantedGenerator,
    /// 1-based `[view, latent]` pairs switched off in the planted mask.
    #[serde(default)]
    pub inactive_shared: Vec<[usize; 2]>,
    #[serde(default)]
    pub inactive_private: Vec<[usize; 2]>,
}

fn default_noise() -> f64 {
    0.2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub train: TrainSection,
    pub ablation: AblationSection,
    pub data: DataSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Read a config file; a relative data manifest is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(m) = &cfg.data.manifest {
            if m.is_relative() {
                cfg.data.manifest = Some(path.parent().unwrap_or(Path::new(".")).join(m));
            }
        }
        Ok(cfg)
    }

    /// Model config for views of the given widths, ablation flags applied.
    pub fn model_config(&self, dims: &[usize]) -> CliResult<DiccaConfig> {
        let views = dims.len();
        let m = &self.model;
        let mut cfg = DiccaConfig::new(dims.to_vec(), m.k_shared, m.k_private.expand(views, "model.k_private")?);
        cfg.gen_input_dims = m.gen_input_dims.as_ref().map(|h| h.expand(views, "model.gen_input_dims")).transpose()?;
        cfg.lambda = m.lambda;
        cfg.mc_samples = m.mc_samples;
        cfg.fusion = m.fusion;
        cfg.encoder = m.encoder;
        cfg.generator = m.generator;
        cfg.init_posterior_std = m.init_posterior_std;
        if self.ablation.disable_private {
            cfg = cfg.without_private();
        }
        if self.ablation.lambda_zero {
            cfg.lambda = 0.0;
        }
        cfg.validate().map_err(|e| CliError::Config(format!("model: {}", strip_prefix(&e.to_string()))))?;
        Ok(cfg)
    }

    pub fn train_options(&self) -> CliResult<TrainOptions> {
        let t = &self.train;
        let opts = TrainOptions {
            lr: t.lr,
            prox: ProxConfig { lr_w: t.lr_w },
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.seed,
            warmup_epochs: t.warmup_epochs,
        };
        opts.validate().map_err(|e| CliError::Config(format!("train: {}", strip_prefix(&e.to_string()))))?;
        Ok(opts)
    }
}

fn strip_prefix(msg: &str) -> &str {
    msg.strip_prefix("invalid config: ").unwrap_or(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_scalar_per_view() {
        let cfg = RunConfig::parse("[model]\nk_shared = 4\nk_private = 2\n").unwrap();
        let m = cfg.model_config(&[5, 6]).unwrap();
        assert_eq!(m.k_private, vec![2, 2]);
        assert_eq!(m.lambda, 1.0);
        assert_eq!(cfg.train_options().unwrap().batch_size, 128);
    }

    #[test]
    fn ablation_flags() {
        let cfg = RunConfig::parse(
            "[model]\nk_shared = 2\nk_private = [1, 3]\n[ablation]\ndisable_private = true\nlambda_zero = true\n",
        )
        .unwrap();
        let m = cfg.model_config(&[4, 4]).unwrap();
        assert_eq!(m.k_private, vec![0, 0]);
        assert_eq!(m.lambda, 0.0);
    }

    #[test]
    fn field_level_errors() {
        let err = RunConfig::parse("[train]\nlr = \"fast\"\n").unwrap_err().to_string();
        assert!(err.contains("lr"), "{err}");
        let err = RunConfig::parse("[model]\nk_sharde = 3\n").unwrap_err().to_string();
        assert!(err.contains("k_sharde"), "{err}");
        let cfg = RunConfig::parse("[model]\nk_private = [1]\n").unwrap();
        assert!(cfg.model_config(&[2, 2]).unwrap_err().to_string().contains("model.k_private"));
        let cfg = RunConfig::parse("[train]\nbatch_size = 0\n").unwrap();
        assert!(cfg.train_options().unwrap_err().to_string().contains("train: batch_size"));
    }
}
