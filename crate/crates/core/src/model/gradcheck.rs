//! Central finite-difference check of [`elbo_grad`].

use serde::{Deserialize, Serialize};

use super::config::DiccaConfig;
use super::elbo::{elbo, elbo_grad, ElboNoise, ObjectiveWeights};
use super::params::DiccaParams;
use crate::error::Result;
use crate::linalg::Matrix;

/// Worst disagreement between the analytic gradient and central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
    pub max_error: f64,
    /// Largest `|analytic − numeric|`.
    pub max_abs_error: f64,
    /// Tensor path and flat index of the worst entry.
    pub worst: String,
    pub entries: usize,
}

/// Compare every gradient entry with `(f(θ + h) − f(θ − h)) / 2h`.
///
/// The error of an entry is relative to its magnitude once that exceeds one
/// and absolute below, since differencing cancels about `ε·|f|/h` digits and
/// small entries cannot be resolved to a fixed relative precision.
pub fn check_gradient(
    config: &DiccaConfig,
    params: &DiccaParams,
    x_views: &[Matrix],
    noise: &ElboNoise,
    weights: &ObjectiveWeights,
    h: f64,
) -> Result<GradCheckReport> {
    let analytic = elbo_grad(config, params, x_views, noise, weights, true)?;
    let grad_tensors: Vec<Vec<f64>> = analytic.grad.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    let names = params.tensor_names();
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_error: 0.0, max_abs_error: 0.0, worst: String::new(), entries: 0 };
    let eval = |p: &DiccaParams| -> Result<f64> { Ok(elbo(config, p, x_views, noise)?.1.value_weighted(weights)) };

    for (t, grads) in grad_tensors.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let original = params.tensors()[t].1[i];
            probe.tensors_mut()[t].1[i] = original + h;
            let up = eval(&probe)?;
            probe.tensors_mut()[t].1[i] = original - h;
            let down = eval(&probe)?;
            probe.tensors_mut()[t].1[i] = original;
            let numeric = (up - down) / (2.0 * h);
            let abs = (a - numeric).abs();
            let err = abs / a.abs().max(numeric.abs()).max(1.0);
            report.max_abs_error = report.max_abs_error.max(abs);
            if err > report.max_error || report.entries == 0 {
                report.max_error = err;
                report.worst = format!("{}[{i}]", names[t]);
            }
            report.entries += 1;
        }
    }
    Ok(report)
}
