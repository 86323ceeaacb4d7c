#![allow(dead_code)]

use dicca_core::linalg::Matrix;
use dicca_core::model::{DiccaConfig, DiccaParams, EncoderTemplate, Fusion, GeneratorTemplate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Small models spanning the encoder and generator templates, with hidden
/// depths from one to three.
pub fn architectures() -> Vec<DiccaConfig> {
    let mut out = Vec::new();
    let mut base = DiccaConfig::new(vec![3, 2], 2, vec![1, 2]);
    base.lambda = 0.7;
    out.push(base.clone());

    for depth in 1..=3 {
        let mut c = base.clone();
        c.encoder = EncoderTemplate::Mlp { width: 4, depth };
        c.generator = GeneratorTemplate::Mlp { width: 3, depth };
        c.gen_input_dims = Some(vec![2, 3]);
        out.push(c);
    }

    let mut c = DiccaConfig::new(vec![3, 3, 3], 2, vec![1, 1, 2]);
    c.fusion = Fusion::Sum;
    c.encoder = EncoderTemplate::Linear;
    c.generator = GeneratorTemplate::Identity;
    c.mc_samples = 2;
    c.lambda = 1.3;
    out.push(c);

    let mut c = base.clone();
    c.generator = GeneratorTemplate::Linear;
    c.encoder = EncoderTemplate::Mlp { width: 3, depth: 2 };
    c.gen_input_dims = Some(vec![4, 1]);
    out.push(c);

    let mut c = base;
    c.k_private = vec![0, 0];
    c.encoder = EncoderTemplate::Mlp { width: 5, depth: 3 };
    out.push(c);
    out
}

/// Seeded parameters with every entry moved off its structured initial
/// value, so no bias sits exactly at a kink and no column is zero.
pub fn perturbed_params(config: &DiccaConfig, seed: u64) -> DiccaParams {
    let mut p = DiccaParams::init(config, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for (_, t) in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += 0.2 * r.random_range(-1.0..1.0);
        }
    }
    p
}

pub fn random_views(config: &DiccaConfig, n: usize, rng: &mut impl Rng) -> Vec<Matrix> {
    config.dims.iter().map(|&d| gaussian(n, d, rng)).collect()
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}
