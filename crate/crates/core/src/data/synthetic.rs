use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::SupportMask;
use crate::model::DiccaConfig;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantedGenerator {
    #[default]
    Linear,
    Tanh,
}

impl PlantedGenerator {
    fn apply(self, a: f64) -> f64 {
        match self {
            Self::Linear => a,
            Self::Tanh => a.tanh(),
        }
    }
}

/// Which columns of the planted loading matrices are active, plus how the
/// views are generated from the gated latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedStructure {
    pub mask: SupportMask,
    #[serde(default)]
    pub generator: PlantedGenerator,
    /// Observation noise standard deviation, one per view.
    pub noise_std: Vec<f64>,
}

impl PlantedStructure {
    /// Every column active, unit noise scale `noise_std` in every view.
    pub fn dense(config: &DiccaConfig, noise_std: f64) -> Self {
        let views = config.views();
        Self {
            mask: SupportMask {
                shared: vec![vec![true; config.k_shared]; views],
                private: config.k_private.iter().map(|&k| vec![true; k]).collect(),
            },
            generator: PlantedGenerator::Linear,
            noise_std: vec![noise_std; views],
        }
    }

    pub fn with_generator(mut self, generator: PlantedGenerator) -> Self {
        self.generator = generator;
        self
    }

    /// Deactivate shared latent `j` in view `m`.
    pub fn without_shared(mut self, m: usize, j: usize) -> Self {
        self.mask.shared[m][j] = false;
        self
    }
}

/// Ground truth behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub mask: SupportMask,
    /// `d_m × K` per view.
    pub lambda_mats: Vec<Matrix>,
    /// `d_m × K_m` per view.
    pub w_mats: Vec<Matrix>,
    pub generator: PlantedGenerator,
    pub noise_std: Vec<f64>,
    pub shared_latents: Matrix,
    pub private_latents: Vec<Matrix>,
}

impl PlantedTruth {
    /// Views produced from the given latents and standard-normal noise under
    /// this truth's loadings and generator.
    pub fn generate(&self, z: &Matrix, z_private: &[Matrix], noise: &[Matrix]) -> Result<Vec<Matrix>> {
        let views = self.lambda_mats.len();
        if z_private.len() != views || noise.len() != views {
            return Err(Error::ShapeMismatch(format!("expected {views} private latents and noise blocks")));
        }
        (0..views)
            .map(|m| {
                if z.cols() != self.lambda_mats[m].cols()
                    || z_private[m].cols() != self.w_mats[m].cols()
                    || z_private[m].rows() != z.rows()
                {
                    return Err(Error::ShapeMismatch(format!("latent widths do not match view {}", m + 1)));
                }
                let mut a = z.matmul_t(&self.lambda_mats[m]);
                a.add_assign(&z_private[m].matmul_t(&self.w_mats[m]));
                if noise[m].shape() != a.shape() {
                    return Err(Error::ShapeMismatch(format!("noise {:?} vs view {:?}", noise[m].shape(), a.shape())));
                }
                let sd = self.noise_std[m];
                let data =
                    a.data().iter().zip(noise[m].data()).map(|(v, e)| self.generator.apply(*v) + sd * e).collect();
                Matrix::new(a.rows(), a.cols(), data)
            })
            .collect()
    }
}

fn check_structure(config: &DiccaConfig, s: &PlantedStructure) -> Result<()> {
    let views = config.views();
    let mask = &s.mask;
    if mask.shared.len() != views || mask.private.len() != views || s.noise_std.len() != views {
        return Err(Error::InvalidStructure(format!("structure must describe {views} views")));
    }
    for m in 0..views {
        if mask.shared[m].len() != config.k_shared || mask.private[m].len() != config.k_private[m] {
            return Err(Error::InvalidStructure(format!("mask shape for view {} does not match the config", m + 1)));
        }
        if !mask.shared[m].iter().chain(&mask.private[m]).any(|&a| a) {
            return Err(Error::InvalidStructure(format!("view {} has no active column", m + 1)));
        }
        if !(s.noise_std[m] >= 0.0 && s.noise_std[m].is_finite()) {
            return Err(Error::InvalidStructure(format!("noise scale for view {} must be finite and >= 0", m + 1)));
        }
    }
    Ok(())
}

fn unit_column<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn planted_matrix<R: Rng>(rows: usize, active: &[bool], rng: &mut R) -> Matrix {
    let mut out = Matrix::zeros(rows, active.len());
    for (j, &on) in active.iter().enumerate() {
        // draw for inactive columns too so toggling one column leaves the others intact
        let col = unit_column(rows, rng);
        if on {
            out.set_column(j, &col);
        }
    }
    out
}

/// Synthetic multi-view data with a planted column support.
///
/// Loadings, latents and noise come from independent streams, so changing the
/// mask does not perturb the latent draws.
pub fn make_synthetic(
    config: &DiccaConfig,
    structure: &PlantedStructure,
    n: usize,
    seed: u64,
) -> Result<(MultiViewDataset, PlantedTruth)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("synthetic data needs n >= 2, got {n}")));
    }
    check_structure(config, structure)?;
    let views = config.views();
    let mut wrng = stream_rng(seed, stream::SYNTH_WEIGHTS);
    let mut lambda_mats = Vec::with_capacity(views);
    let mut w_mats = Vec::with_capacity(views);
    for m in 0..views {
        lambda_mats.push(planted_matrix(config.dims[m], &structure.mask.shared[m], &mut wrng));
        w_mats.push(planted_matrix(config.dims[m], &structure.mask.private[m], &mut wrng));
    }

    let mut zrng = stream_rng(seed, stream::SYNTH_LATENT);
    let shared_latents = Matrix::from_fn(n, config.k_shared, |_, _| zrng.sample(StandardNormal));
    let private_latents: Vec<Matrix> =
        config.k_private.iter().map(|&k| Matrix::from_fn(n, k, |_, _| zrng.sample(StandardNormal))).collect();

    let mut erng = stream_rng(seed, stream::SYNTH_NOISE);
    let noise: Vec<Matrix> =
        config.dims.iter().map(|&d| Matrix::from_fn(n, d, |_, _| erng.sample(StandardNormal))).collect();

    let truth = PlantedTruth {
        mask: structure.mask.clone(),
        lambda_mats,
        w_mats,
        generator: structure.generator,
        noise_std: structure.noise_std.clone(),
        shared_latents,
        private_latents,
    };
    let generated = truth.generate(&truth.shared_latents, &truth.private_latents, &noise)?;
    let dataset = MultiViewDataset::new(generated, None)?
        .with_provenance(format!("synthetic planted structure, n {n}, seed {seed}"));
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> DiccaConfig {
        DiccaConfig::new(vec![5, 4], 3, vec![2, 1])
    }

    #[test]
    fn masked_columns_are_exact_zero_and_active_unit_norm() {
        let cfg = config();
        let s = PlantedStructure::dense(&cfg, 0.1).without_shared(1, 2);
        let (_, t) = make_synthetic(&cfg, &s, 10, 4).unwrap();
        assert!(t.lambda_mats[1].column(2).iter().all(|&v| v == 0.0));
        for j in 0..3 {
            assert!((t.lambda_mats[0].column_norm(j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_linear_view_is_exact_product() {
        let cfg = config();
        let (d, t) = make_synthetic(&cfg, &PlantedStructure::dense(&cfg, 0.0), 6, 1).unwrap();
        for m in 0..2 {
            let mut expect = t.shared_latents.matmul_t(&t.lambda_mats[m]);
            expect.add_assign(&t.private_latents[m].matmul_t(&t.w_mats[m]));
            assert_eq!(d.view(m), &expect);
        }
    }

    #[test]
    fn resampling_masked_latent_leaves_view_untouched() {
        let cfg = config();
        let s = PlantedStructure::dense(&cfg, 0.3).without_shared(0, 1).with_generator(PlantedGenerator::Tanh);
        let (d, t) = make_synthetic(&cfg, &s, 8, 2).unwrap();
        let mut z = t.shared_latents.clone();
        for r in 0..8 {
            z[(r, 1)] = 100.0 + r as f64;
        }
        let mut erng = stream_rng(2, stream::SYNTH_NOISE);
        let noise: Vec<Matrix> =
            cfg.dims.iter().map(|&d| Matrix::from_fn(8, d, |_, _| erng.sample(StandardNormal))).collect();
        let again = t.generate(&z, &t.private_latents, &noise).unwrap();
        assert_eq!(&again[0], d.view(0));
        assert_ne!(&again[1], d.view(1));
    }

    #[test]
    fn invalid_structures() {
        let cfg = config();
        let mut s = PlantedStructure::dense(&cfg, 0.1);
        s.mask.shared[0] = vec![false; 3];
        s.mask.private[0] = vec![false; 2];
        assert!(matches!(make_synthetic(&cfg, &s, 4, 0), Err(Error::InvalidStructure(_))));
        let mut s = PlantedStructure::dense(&cfg, 0.1);
        s.mask.shared.pop();
        assert!(matches!(make_synthetic(&cfg, &s, 4, 0), Err(Error::InvalidStructure(_))));
        assert!(make_synthetic(&cfg, &PlantedStructure::dense(&cfg, 0.1), 1, 0).is_err());
    }
}
