//! Reconstruction quality, group-dependency heatmaps, feature loadings and
//! support recovery.

use serde::{Deserialize, Serialize};

use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{reconstruct, DiccaConfig, DiccaParams};
use crate::nn::Layer;

fn reconstruction(config: &DiccaConfig, params: &DiccaParams, data: &MultiViewDataset) -> Result<Vec<Matrix>> {
    params.check_against(config)?;
    if data.dims() != config.dims {
        return Err(Error::ShapeMismatch(format!("data widths {:?} vs model {:?}", data.dims(), config.dims)));
    }
    reconstruct(config, params, data.views())
}

/// Mean squared error per view, reconstructing from posterior means.
///
/// `_seed` is reserved for a sampled variant; the estimate is deterministic.
pub fn reconstruction_mse(
    config: &DiccaConfig,
    params: &DiccaParams,
    data: &MultiViewDataset,
    _seed: u64,
) -> Result<Vec<f64>> {
    let recon = reconstruction(config, params, data)?;
    Ok(recon
        .iter()
        .zip(data.views())
        .map(|(r, x)| {
            let ss: f64 = r.data().iter().zip(x.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            ss / x.data().len().max(1) as f64
        })
        .collect())
}

/// `1 − Σ(x − x̂)² / Σx²` per view.
pub fn variance_explained_r2(config: &DiccaConfig, params: &DiccaParams, data: &MultiViewDataset) -> Result<Vec<f64>> {
    let recon = reconstruction(config, params, data)?;
    recon
        .iter()
        .zip(data.views())
        .enumerate()
        .map(|(m, (r, x))| {
            let sst: f64 = x.data().iter().map(|v| v * v).sum();
            if sst == 0.0 {
                return Err(Error::DegenerateView(m));
            }
            let ssr: f64 = r.data().iter().zip(x.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(1.0 - ssr / sst)
        })
        .collect()
}

/// Column norms of the latent-to-group matrices, view by latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDependency {
    /// `M × K`
    pub shared: Matrix,
    /// `M × max K_m`; cells past a view's `K_m` are zero.
    pub private: Matrix,
    pub shared_max: f64,
    pub private_max: f64,
}

impl GroupDependency {
    fn scaled(m: &Matrix, max: f64) -> Matrix {
        if max > 0.0 {
            m.map(|v| v / max)
        } else {
            Matrix::zeros(m.rows(), m.cols())
        }
    }

    /// Each matrix divided by its own maximum; all-zero stays all-zero.
    pub fn normalized(&self) -> (Matrix, Matrix) {
        (Self::scaled(&self.shared, self.shared_max), Self::scaled(&self.private, self.private_max))
    }
}

pub fn group_dependency(params: &DiccaParams) -> GroupDependency {
    let views = params.views();
    let k = params.lambda_mats.first().map_or(0, Matrix::cols);
    let kp = params.w_mats.iter().map(Matrix::cols).max().unwrap_or(0);
    let shared = Matrix::from_fn(views, k, |m, j| params.lambda_mats[m].column_norm(j));
    let private = Matrix::from_fn(views, kp, |m, j| {
        let w = &params.w_mats[m];
        if j < w.cols() {
            w.column_norm(j)
        } else {
            0.0
        }
    });
    let max = |m: &Matrix| m.data().iter().copied().fold(0.0, f64::max);
    GroupDependency { shared_max: max(&shared), private_max: max(&private), shared, private }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentKind {
    Shared,
    Private,
}

/// Per-feature influence of one latent dimension on one view.
///
/// With a feature-aligned generator input this is the selected column of Λ or
/// W. Otherwise the column is mapped through the generator's first affine
/// layer.
pub fn feature_loadings(
    config: &DiccaConfig,
    params: &DiccaParams,
    view: usize,
    latent_dim: usize,
    which: LatentKind,
) -> Result<Vec<f64>> {
    params.check_against(config)?;
    if view >= config.views() {
        return Err(Error::InvalidIndex(format!("view {view} of {}", config.views())));
    }
    let mat = match which {
        LatentKind::Shared => &params.lambda_mats[view],
        LatentKind::Private => &params.w_mats[view],
    };
    if latent_dim >= mat.cols() {
        return Err(Error::InvalidIndex(format!("latent {latent_dim} of {} ({which:?})", mat.cols())));
    }
    let col = mat.column(latent_dim);
    if config.gen_input_dim(view) == config.dims[view] {
        return Ok(col);
    }
    let weight = params.generators[view]
        .layers()
        .iter()
        .find_map(|l| match l {
            Layer::Affine { weight, .. } => Some(weight),
            _ => None,
        })
        .ok_or_else(|| Error::InvalidConfig("generator has no affine layer".into()))?;
    // weight is input × output; the influence on output unit o is Σ_i col_i · weight[i, o]
    Ok((0..weight.cols()).map(|o| (0..weight.rows()).map(|i| col[i] * weight[(i, o)]).sum()).collect())
}

/// The `n` features with the largest absolute loading, as `(1-based feature
/// id, |loading|)`; ties go to the lower feature id.
pub fn rank_features(loadings: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = loadings.iter().enumerate().map(|(i, v)| (i + 1, v.abs())).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

pub fn top_features(
    config: &DiccaConfig,
    params: &DiccaParams,
    view: usize,
    latent_dim: usize,
    n: usize,
    which: LatentKind,
) -> Result<Vec<(usize, f64)>> {
    Ok(rank_features(&feature_loadings(config, params, view, latent_dim, which)?, n))
}

/// Column activity of every latent-to-group matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportMask {
    /// `[view][latent]`
    pub shared: Vec<Vec<bool>>,
    /// `[view][private latent]`
    pub private: Vec<Vec<bool>>,
}

impl SupportMask {
    fn shape(&self) -> (Vec<usize>, Vec<usize>) {
        (self.shared.iter().map(Vec::len).collect(), self.private.iter().map(Vec::len).collect())
    }

    fn cells(&self) -> impl Iterator<Item = bool> + '_ {
        self.shared.iter().chain(&self.private).flatten().copied()
    }

    pub fn active_count(&self) -> usize {
        self.cells().filter(|&a| a).count()
    }

    pub fn inactive_count(&self) -> usize {
        self.cells().filter(|&a| !a).count()
    }

    /// Shared-latent relabelling: new dimension `i` is old dimension `perm[i]`.
    pub fn permute_shared(&self, perm: &[usize]) -> Self {
        Self {
            shared: self.shared.iter().map(|row| perm.iter().map(|&p| row[p]).collect()).collect(),
            private: self.private.clone(),
        }
    }
}

/// F1 score of the estimated active columns against the truth.
pub fn support_f1(estimated: &SupportMask, truth: &SupportMask) -> Result<f64> {
    if estimated.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(format!("mask shapes {:?} vs {:?}", estimated.shape(), truth.shape())));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (e, t) in estimated.cells().zip(truth.cells()) {
        match (e, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fneg == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

/// Active iff the column's 2-norm exceeds `tau`.
pub fn mask_from_params(params: &DiccaParams, tau: f64) -> SupportMask {
    let active = |m: &Matrix| (0..m.cols()).map(|j| m.column_norm(j) > tau).collect();
    SupportMask {
        shared: params.lambda_mats.iter().map(active).collect(),
        private: params.w_mats.iter().map(active).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_features(&[0.1, -0.9, 0.5], 2), vec![(2, 0.9), (3, 0.5)]);
        assert_eq!(rank_features(&[0.3, -0.3, 0.3], 3), vec![(1, 0.3), (2, 0.3), (3, 0.3)]);
    }

    #[test]
    fn f1_examples() {
        let mk = |s: Vec<bool>| SupportMask { shared: vec![s], private: vec![vec![]] };
        let truth = mk(vec![true, true, false, false]);
        assert_eq!(support_f1(&truth, &truth).unwrap(), 1.0);
        assert_eq!(support_f1(&mk(vec![false, false, true, true]), &truth).unwrap(), 0.0);
        let half = support_f1(&mk(vec![true, false, false, false]), &truth).unwrap();
        assert!((half - 2.0 / 3.0).abs() < 1e-15);
        let empty = mk(vec![false; 4]);
        assert_eq!(support_f1(&empty, &empty).unwrap(), 1.0);
        assert!(support_f1(&mk(vec![true]), &truth).is_err());
    }

    #[test]
    fn dependency_normalization() {
        let cfg = DiccaConfig::new(vec![3, 3], 2, vec![1, 2]);
        let mut p = DiccaParams::zeros(&cfg).unwrap();
        let g = group_dependency(&p);
        assert_eq!(g.shared_max, 0.0);
        let (s, pr) = g.normalized();
        assert!(s.data().iter().chain(pr.data()).all(|&v| v == 0.0));
        assert_eq!(pr.shape(), (2, 2));

        p.lambda_mats[1].set_column(0, &[0.0, 3.0, 4.0]);
        let (s, _) = group_dependency(&p).normalized();
        assert_eq!(s[(1, 0)], 1.0);
        assert_eq!(s.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn masks_from_thresholds() {
        let cfg = DiccaConfig::new(vec![2], 2, vec![1]);
        let mut p = DiccaParams::zeros(&cfg).unwrap();
        p.lambda_mats[0].set_column(1, &[1.0, 0.0]);
        p.w_mats[0].set_column(0, &[0.0, 1.0]);
        let m = mask_from_params(&p, 0.0);
        assert_eq!(m.shared, vec![vec![false, true]]);
        assert_eq!(m.private, vec![vec![true]]);
        assert_eq!(mask_from_params(&p, 2.0).active_count(), 0);
    }
}
