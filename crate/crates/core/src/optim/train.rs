use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::prox::prox_columns;
use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{elbo_grad, DiccaConfig, DiccaParams, ElboNoise, ElboParts, ObjectiveWeights, ParamGroup};
use crate::rng::{stream, stream_rng};

/// Step size of the proximal updates on Λ^(m) and W^(m). The shrinkage
/// threshold is `lr_w · λ` with λ taken from the model config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxConfig {
    pub lr_w: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self { lr_w: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Adam learning rate for generators, encoders and noise variances.
    pub lr: f64,
    pub prox: ProxConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Leading epochs trained without shrinkage (threshold 0), letting the
    /// encoders become informative before the penalty can switch columns off.
    #[serde(default)]
    pub warmup_epochs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { lr: 1e-4, prox: ProxConfig::default(), epochs: 100, batch_size: 128, seed: 0, warmup_epochs: 0 }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.prox.lr_w > 0.0 && self.prox.lr_w.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr_w must be positive, got {}", self.prox.lr_w)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exactly-zero column counts of one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroColumns {
    pub shared: usize,
    pub shared_total: usize,
    pub private: usize,
    pub private_total: usize,
}

pub fn zero_columns(params: &DiccaParams) -> Vec<ZeroColumns> {
    let zeros = |m: &Matrix| (0..m.cols()).filter(|&j| m.column(j).iter().all(|&v| v == 0.0)).count();
    params
        .lambda_mats
        .iter()
        .zip(&params.w_mats)
        .map(|(l, w)| ZeroColumns {
            shared: zeros(l),
            shared_total: l.cols(),
            private: zeros(w),
            private_total: w.cols(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Reconstruction and KL terms summed over the epoch's batches, the
    /// generator prior and penalty at the end of the epoch.
    pub parts: ElboParts,
    /// Full-data objective assembled from `parts`.
    pub elbo: f64,
    pub elbo_per_sample: f64,
    pub zero_columns: Vec<ZeroColumns>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_samples: usize,
    pub options: TrainOptions,
    pub lambda: f64,
    pub epochs: Vec<EpochRecord>,
    /// Zero columns of the returned parameters.
    pub final_zero_columns: Vec<ZeroColumns>,
}

impl TrainReport {
    /// Trailing moving average of the per-sample ELBO; entry `i` averages
    /// epochs `max(0, i+1−window)..=i`.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let vals: Vec<f64> = self.epochs.iter().map(|e| e.elbo_per_sample).collect();
        let w = window.max(1);
        (0..vals.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                vals[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }

    pub fn total_zero_columns(&self) -> usize {
        self.final_zero_columns.iter().map(|z| z.shared + z.private).sum()
    }
}

/// What one minibatch step did.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Unweighted batch terms at the pre-step parameters.
    pub parts: ElboParts,
    /// The batch objective the step ascended.
    pub objective: f64,
    /// Shrinkage threshold applied to every column.
    pub threshold: f64,
    /// Column norms after the gradient step and before shrinkage, `(Λ, W)`
    /// per view.
    pub pre_prox_norms: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Minibatch optimizer state: Adam on networks and noise variances, proximal
/// gradient ascent on the latent-to-group matrices.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: DiccaConfig,
    params: DiccaParams,
    adam: AdamState,
    adam_names: Vec<String>,
    options: TrainOptions,
    n_total: usize,
}

impl Trainer {
    pub fn new(config: &DiccaConfig, params: DiccaParams, n_total: usize, options: TrainOptions) -> Result<Self> {
        config.validate()?;
        options.validate()?;
        params.check_against(config)?;
        if n_total == 0 {
            return Err(Error::InvalidConfig("training set is empty".into()));
        }
        let names = params.tensor_names();
        let mut sizes = Vec::new();
        let mut adam_names = Vec::new();
        for ((group, t), name) in params.tensors().into_iter().zip(names) {
            if group != ParamGroup::LatentToGroup {
                sizes.push(t.len());
                adam_names.push(name);
            }
        }
        Ok(Self {
            config: config.clone(),
            adam: AdamState::new(options.lr, &sizes),
            adam_names,
            params,
            options,
            n_total,
        })
    }

    pub fn params(&self) -> &DiccaParams {
        &self.params
    }

    pub fn into_params(self) -> DiccaParams {
        self.params
    }

    /// Per-batch weights: mean-per-sample data term, generator prior spread
    /// over the `N` samples of an epoch.
    pub fn weights(&self, batch: usize) -> ObjectiveWeights {
        ObjectiveWeights { data: 1.0 / batch as f64, theta_prior: 1.0 / self.n_total as f64, group: 1.0 }
    }

    /// One update from the gradient at the current parameters. `position` is
    /// `(epoch, batch)` for error reporting.
    pub fn step(&mut self, x_views: &[Matrix], noise: &ElboNoise, position: (usize, usize)) -> Result<StepOutcome> {
        let diverged = || Error::TrainingDiverged { epoch: position.0, batch: position.1 };
        let batch = x_views.first().map_or(0, Matrix::rows);
        if batch == 0 {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        let weights = self.weights(batch);
        let g = match elbo_grad(&self.config, &self.params, x_views, noise, &weights, false) {
            Ok(g) => g,
            Err(Error::InvalidMatrix(_)) => return Err(diverged()),
            Err(e) => return Err(e),
        };
        if !g.value.is_finite() {
            return Err(diverged());
        }
        let lr_w = self.options.prox.lr_w;
        let threshold = if position.0 <= self.options.warmup_epochs { 0.0 } else { lr_w * self.config.lambda };
        for (group, t) in g.grad.tensors() {
            if group == ParamGroup::LatentToGroup && t.iter().any(|v| !v.is_finite()) {
                return Err(diverged());
            }
        }

        // Adam minimizes, so it receives the negated ascent direction.
        let neg: Vec<Vec<f64>> = g
            .grad
            .tensors()
            .into_iter()
            .filter(|(group, _)| *group != ParamGroup::LatentToGroup)
            .map(|(_, t)| t.iter().map(|v| -v).collect())
            .collect();
        let neg_refs: Vec<&[f64]> = neg.iter().map(Vec::as_slice).collect();
        {
            let mut targets: Vec<&mut [f64]> = self
                .params
                .tensors_mut()
                .into_iter()
                .filter(|(group, _)| *group != ParamGroup::LatentToGroup)
                .map(|(_, t)| t)
                .collect();
            match self.adam.step(&mut targets, &neg_refs, &self.adam_names) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient { .. }) => return Err(diverged()),
                Err(e) => return Err(e),
            }
        }

        let mut pre_prox_norms = Vec::with_capacity(self.config.views());
        for m in 0..self.config.views() {
            let step = |mat: &mut Matrix, grad: &Matrix| {
                for (p, d) in mat.data_mut().iter_mut().zip(grad.data()) {
                    *p += lr_w * d;
                }
                prox_columns(mat, threshold)
            };
            let l = step(&mut self.params.lambda_mats[m], &g.grad.lambda_mats[m]);
            let w = step(&mut self.params.w_mats[m], &g.grad.w_mats[m]);
            pre_prox_norms.push((l, w));
        }
        Ok(StepOutcome { parts: g.parts, objective: g.value, threshold, pre_prox_norms })
    }
}

fn add_parts(acc: &mut Option<ElboParts>, p: &ElboParts) {
    match acc {
        None => *acc = Some(p.clone()),
        Some(a) => {
            a.recon.iter_mut().zip(&p.recon).for_each(|(x, y)| *x += y);
            a.kl_shared += p.kl_shared;
            a.kl_private.iter_mut().zip(&p.kl_private).for_each(|(x, y)| *x += y);
        }
    }
}

/// Fit the model by minibatch training from parameters initialized with the
/// run seed.
pub fn train(
    dataset: &MultiViewDataset,
    config: &DiccaConfig,
    options: &TrainOptions,
) -> Result<(DiccaParams, TrainReport)> {
    let init = DiccaParams::init(config, options.seed)?;
    train_from(dataset, config, init, options)
}

/// [`train`] starting from explicit parameters.
pub fn train_from(
    dataset: &MultiViewDataset,
    config: &DiccaConfig,
    init: DiccaParams,
    options: &TrainOptions,
) -> Result<(DiccaParams, TrainReport)> {
    let n = dataset.n_samples();
    if n == 0 {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if dataset.dims() != config.dims {
        return Err(Error::ShapeMismatch(format!("data widths {:?} vs model {:?}", dataset.dims(), config.dims)));
    }
    let mut trainer = Trainer::new(config, init, n, *options)?;
    let mut epochs = Vec::with_capacity(options.epochs);
    let start = Instant::now();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=options.epochs {
        let e = epoch as u64;
        order.shuffle(&mut stream_rng(options.seed, stream::SHUFFLE + e));
        let mut noise_rng = stream_rng(options.seed, stream::TRAIN_NOISE + e);
        let mut sums = None;
        for (b, idx) in order.chunks(options.batch_size).enumerate() {
            let views: Vec<Matrix> = dataset.views().iter().map(|v| v.select_rows(idx)).collect();
            let noise = ElboNoise::sample(config, idx.len(), &mut noise_rng);
            let out = trainer.step(&views, &noise, (epoch, b + 1))?;
            add_parts(&mut sums, &out.parts);
        }
        let mut parts = sums.expect("at least one batch per epoch");
        let params = trainer.params();
        let norm_sum = |mats: &[Matrix]| -> f64 {
            mats.iter().map(|m| (0..m.cols()).map(|j| m.column_norm(j)).sum::<f64>()).sum()
        };
        parts.theta_prior = params.generator_l2();
        parts.penalty_shared = config.lambda * norm_sum(&params.lambda_mats);
        parts.penalty_private = config.lambda * norm_sum(&params.w_mats);
        let elbo = parts.value();
        if !elbo.is_finite() {
            return Err(Error::TrainingDiverged { epoch, batch: 0 });
        }
        epochs.push(EpochRecord {
            epoch,
            elbo,
            elbo_per_sample: elbo / n as f64,
            parts,
            zero_columns: zero_columns(params),
            wall_clock_secs: start.elapsed().as_secs_f64(),
        });
    }
    let params = trainer.into_params();
    let report = TrainReport {
        n_samples: n,
        options: *options,
        lambda: config.lambda,
        epochs,
        final_zero_columns: zero_columns(&params),
    };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, PlantedStructure};

    fn setup(lambda: f64) -> (DiccaConfig, MultiViewDataset) {
        let mut cfg = DiccaConfig::new(vec![4, 3], 2, vec![1, 1]);
        cfg.lambda = lambda;
        let (d, _) = make_synthetic(&cfg, &PlantedStructure::dense(&cfg, 0.3), 40, 1).unwrap();
        (cfg, d)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (cfg, d) = setup(1.0);
        let opts = TrainOptions { epochs: 0, ..Default::default() };
        let (p, report) = train(&d, &cfg, &opts).unwrap();
        assert_eq!(p, DiccaParams::init(&cfg, 0).unwrap());
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn deterministic_and_reports_every_epoch() {
        let (cfg, d) = setup(1.0);
        let opts = TrainOptions { epochs: 3, batch_size: 16, lr: 1e-3, seed: 4, ..Default::default() };
        let (a, ra) = train(&d, &cfg, &opts).unwrap();
        let (b, _) = train(&d, &cfg, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.epochs.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
        for z in &ra.final_zero_columns {
            assert!(z.shared <= z.shared_total && z.private <= z.private_total);
        }
    }

    #[test]
    fn large_threshold_zeroes_columns_exactly() {
        let (cfg, d) = setup(1e4);
        let opts = TrainOptions { epochs: 1, batch_size: 40, ..Default::default() };
        let mut t = Trainer::new(&cfg, DiccaParams::init(&cfg, 0).unwrap(), 40, opts).unwrap();
        let noise = ElboNoise::zeros(&cfg, 40);
        let out = t.step(d.views(), &noise, (1, 1)).unwrap();
        assert_eq!(out.threshold, 1.0);
        for (m, (l, w)) in out.pre_prox_norms.iter().enumerate() {
            for (j, &norm) in l.iter().enumerate() {
                let col = t.params().lambda_mats[m].column(j);
                assert_eq!(norm <= 1.0, col.iter().all(|v| v.to_bits() == 0));
            }
            assert_eq!(w.len(), 1);
        }
    }

    #[test]
    fn zero_lambda_never_zeroes() {
        let (cfg, d) = setup(0.0);
        let opts = TrainOptions { epochs: 2, batch_size: 8, lr: 1e-3, ..Default::default() };
        let (_, report) = train(&d, &cfg, &opts).unwrap();
        assert_eq!(report.total_zero_columns(), 0);
    }

    #[test]
    fn moving_average_window() {
        let (cfg, d) = setup(1.0);
        let opts = TrainOptions { epochs: 4, batch_size: 20, ..Default::default() };
        let (_, report) = train(&d, &cfg, &opts).unwrap();
        let ma = report.moving_average(2);
        let e: Vec<f64> = report.epochs.iter().map(|r| r.elbo_per_sample).collect();
        assert_eq!(ma[0], e[0]);
        assert!((ma[3] - (e[2] + e[3]) / 2.0).abs() < 1e-12);
    }
}
