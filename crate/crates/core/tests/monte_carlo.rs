//! Sampling routines checked against their closed forms within a few
//! standard errors.

mod common;

use common::{gaussian, rng};
use dicca_core::cca::PccaModel;
use dicca_core::data::{make_synthetic, PlantedStructure};
use dicca_core::linalg::Matrix;
use dicca_core::model::{kl_std_normal, reparam_sample, DiccaConfig, GaussianPosterior, SparsityPrior};
use rand::Rng;
use rand_distr::StandardNormal;

/// Mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn within(xs: &[f64], expect: f64, k: f64, what: &str) {
    let (mean, se) = mean_se(xs);
    assert!((mean - expect).abs() <= k * se, "{what}: mean {mean} vs {expect}, se {se}");
}

#[test]
fn reparameterized_samples_have_posterior_moments() {
    let post = GaussianPosterior::new(
        Matrix::from_rows(&[vec![0.5, -2.0, 0.0]]).unwrap(),
        Matrix::from_rows(&[vec![1.0, 0.3, 2.5]]).unwrap(),
    )
    .unwrap();
    let mut r = rng(1);
    let n = 40_000;
    let draws: Vec<Matrix> = (0..n).map(|_| reparam_sample(&post, &gaussian(1, 3, &mut r)).unwrap()).collect();
    for k in 0..3 {
        let (mu, sd) = (post.mean()[(0, k)], post.std()[(0, k)]);
        let xs: Vec<f64> = draws.iter().map(|d| d[(0, k)]).collect();
        within(&xs, mu, 4.0, "mean");
        let sq: Vec<f64> = xs.iter().map(|x| (x - mu).powi(2)).collect();
        within(&sq, sd * sd, 4.0, "variance");
    }
}

#[test]
fn closed_form_kl_matches_monte_carlo() {
    let (mu, sd) = (vec![0.7, -1.2], vec![0.4, 1.6]);
    let post = GaussianPosterior::new(
        Matrix::from_rows(std::slice::from_ref(&mu)).unwrap(),
        Matrix::from_rows(std::slice::from_ref(&sd)).unwrap(),
    )
    .unwrap();
    let kl = kl_std_normal(&post)[0];
    let mut r = rng(2);
    let samples: Vec<f64> = (0..50_000)
        .map(|_| {
            (0..2)
                .map(|k| {
                    let e: f64 = r.sample(StandardNormal);
                    let z = mu[k] + sd[k] * e;
                    // log q(z) − log p(z)
                    -0.5 * e * e - sd[k].ln() + 0.5 * z * z
                })
                .sum()
        })
        .collect();
    within(&samples, kl, 4.0, "kl");
}

#[test]
fn gamma_scale_has_the_prior_mean() {
    for (lambda, h) in [(1.0, 20usize), (0.5, 3), (2.0, 128)] {
        let prior = SparsityPrior::new(lambda, h).unwrap();
        let mut r = rng(h as u64);
        let xs: Vec<f64> = (0..40_000).map(|_| prior.sample_gamma_sq(&mut r)).collect();
        within(&xs, (h as f64 + 1.0) / (lambda * lambda), 4.0, "gamma mean");
        // column entries are N(0, γ²), so E‖column‖² = h·E γ²
        let cols: Vec<f64> =
            (0..20_000).map(|_| prior.sample_column(&mut r).1.iter().map(|v| v * v).sum::<f64>()).collect();
        within(&cols, h as f64 * (h as f64 + 1.0) / (lambda * lambda), 4.0, "column energy");
    }
}

#[test]
fn pcca_samples_match_joint_covariance() {
    let w1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, -0.8]]).unwrap();
    let w2 = Matrix::from_rows(&[vec![0.3, 1.1], vec![-0.6, 0.2], vec![0.0, 0.9]]).unwrap();
    let psi1 = Matrix::from_rows(&[vec![0.5, 0.1], vec![0.1, 0.4]]).unwrap();
    let psi2 = Matrix::from_diag(&[0.3, 0.6, 0.2]);
    let model = PccaModel::new(w1, w2, psi1, psi2).unwrap();
    let cov = model.joint_covariance();
    let (x1, x2) = model.sample(60_000, 3).unwrap();
    let x = Matrix::hcat(&[&x1, &x2]).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let prods: Vec<f64> = (0..x.rows()).map(|r| x[(r, i)] * x[(r, j)]).collect();
            within(&prods, cov[(i, j)], 3.0, &format!("cov[{i},{j}]"));
        }
    }
}

#[test]
fn synthetic_views_have_the_planted_covariance() {
    let cfg = DiccaConfig::new(vec![4, 3], 2, vec![1, 2]);
    let s = PlantedStructure::dense(&cfg, 0.5).without_shared(1, 0);
    let (d, t) = make_synthetic(&cfg, &s, 60_000, 8).unwrap();
    for m in 0..2 {
        let expect =
            t.lambda_mats[m].matmul_t(&t.lambda_mats[m]).add(&t.w_mats[m].matmul_t(&t.w_mats[m])).add_diag(0.25);
        let x = d.view(m);
        for i in 0..x.cols() {
            for j in 0..x.cols() {
                let prods: Vec<f64> = (0..x.rows()).map(|r| x[(r, i)] * x[(r, j)]).collect();
                within(&prods, expect[(i, j)], 4.0, &format!("view {m} cov[{i},{j}]"));
            }
        }
    }
}

#[test]
fn masked_latents_are_uncorrelated_with_their_view() {
    let cfg = DiccaConfig::new(vec![5, 5], 3, vec![1, 1]);
    let s = PlantedStructure::dense(&cfg, 0.3).without_shared(0, 1).without_shared(1, 2);
    let n = 100_000;
    let (d, t) = make_synthetic(&cfg, &s, n, 12).unwrap();
    let bound = 3.0 / (n as f64).sqrt();
    for (m, j) in [(0, 1), (1, 2)] {
        let z = t.shared_latents.column(j);
        for f in 0..5 {
            let x = d.view(m).column(f);
            let n_f = n as f64;
            let (mx, mz) = (x.iter().sum::<f64>() / n_f, z.iter().sum::<f64>() / n_f);
            let cov: f64 = x.iter().zip(&z).map(|(a, b)| (a - mx) * (b - mz)).sum();
            let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let vz: f64 = z.iter().map(|b| (b - mz).powi(2)).sum();
            let corr = cov / (vx * vz).sqrt();
            assert!(corr.abs() < bound, "view {m} feature {f} vs latent {j}: {corr}");
        }
    }
    // an active latent is clearly visible
    let z = t.shared_latents.column(0);
    let x = d.view(0).column(0);
    let prods: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a * b).collect();
    within(&prods, t.lambda_mats[0][(0, 0)], 4.0, "active loading");
}
