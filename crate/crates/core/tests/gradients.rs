mod common;

use common::{architectures, perturbed_params, random_views, rng};
use dicca_core::linalg::Matrix;
use dicca_core::model::{check_gradient, elbo, elbo_grad, ElboNoise, ObjectiveWeights};
use dicca_core::nn::{LayerKind, Network};
use proptest::prelude::*;

#[test]
fn elbo_gradient_matches_central_differences() {
    let archs = architectures();
    for seed in 0..archs.len() as u64 * 2 {
        let cfg = &archs[seed as usize % archs.len()];
        let params = perturbed_params(cfg, seed);
        let mut r = rng(seed);
        let x = random_views(cfg, 4, &mut r);
        let noise = ElboNoise::sample(cfg, 4, &mut r);
        let report = check_gradient(cfg, &params, &x, &noise, &ObjectiveWeights::FULL, 1e-5).unwrap();
        assert!(report.max_error < 1e-5, "arch {}: {report:?}", seed as usize % archs.len());
    }
}

#[test]
fn weighted_objective_gradient_matches_central_differences() {
    let cfg = &architectures()[2];
    let params = perturbed_params(cfg, 11);
    let mut r = rng(11);
    let x = random_views(cfg, 3, &mut r);
    let noise = ElboNoise::sample(cfg, 3, &mut r);
    let w = ObjectiveWeights { data: 0.25, theta_prior: 0.01, group: 3.0 };
    let report = check_gradient(cfg, &params, &x, &noise, &w, 1e-5).unwrap();
    assert!(report.max_error < 1e-5, "{report:?}");
}

#[test]
fn gradient_value_matches_elbo_and_penalty_flag_only_touches_loadings() {
    let cfg = &architectures()[1];
    let params = perturbed_params(cfg, 3);
    let mut r = rng(3);
    let x = random_views(cfg, 5, &mut r);
    let noise = ElboNoise::sample(cfg, 5, &mut r);
    let (value, _) = elbo(cfg, &params, &x, &noise).unwrap();
    let with = elbo_grad(cfg, &params, &x, &noise, &ObjectiveWeights::FULL, true).unwrap();
    let without = elbo_grad(cfg, &params, &x, &noise, &ObjectiveWeights::FULL, false).unwrap();
    assert!((with.value - value).abs() < 1e-12);
    for ((group, a), (_, b)) in with.grad.tensors().iter().zip(without.grad.tensors()) {
        let same = a.iter().zip(b).all(|(x, y)| x == y);
        let loadings = *group == dicca_core::model::ParamGroup::LatentToGroup;
        assert_eq!(same, !loadings, "{group:?}");
    }
}

fn mlp(depth: usize) -> Vec<LayerKind> {
    let mut kinds = Vec::new();
    let mut input = 3;
    for (i, act) in [LayerKind::Tanh, LayerKind::Softplus, LayerKind::Relu].iter().take(depth).enumerate() {
        kinds.push(LayerKind::Affine { input, output: 4 + i });
        kinds.push(*act);
        input = 4 + i;
    }
    kinds.push(LayerKind::Affine { input, output: 2 });
    kinds
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// The reverse pass is linear in the upstream gradient.
    #[test]
    fn backward_is_linear_in_upstream(seed in 0u64..1000, depth in 1usize..=3, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut r = rng(seed);
        let net = Network::init(3, &mlp(depth), &mut r).unwrap();
        let x = common::gaussian(5, 3, &mut r);
        let tape = net.forward_tape(&x).unwrap();
        let d1 = common::gaussian(5, 2, &mut r);
        let d2 = common::gaussian(5, 2, &mut r);
        let combined = d1.scale(a).add(&d2.scale(b));
        let (dx, g) = net.backward(&tape, &combined).unwrap();
        let (dx1, g1) = net.backward(&tape, &d1).unwrap();
        let (dx2, g2) = net.backward(&tape, &d2).unwrap();
        let expect: Matrix = dx1.scale(a).add(&dx2.scale(b));
        prop_assert!(dx.sub(&expect).max_abs() < 1e-12);
        for ((t, t1), t2) in g.tensors().iter().zip(g1.tensors()).zip(g2.tensors()) {
            for ((v, v1), v2) in t.iter().zip(t1).zip(t2) {
                prop_assert!((v - (a * v1 + b * v2)).abs() < 1e-12);
            }
        }
    }

    /// Network input gradients agree with central differences.
    #[test]
    fn network_input_gradient(seed in 0u64..1000, depth in 1usize..=3) {
        let mut r = rng(seed);
        let net = Network::init(3, &mlp(depth), &mut r).unwrap();
        let x = common::gaussian(2, 3, &mut r);
        let dy = common::gaussian(2, 2, &mut r);
        let (dx, _) = net.backward(&net.forward_tape(&x).unwrap(), &dy).unwrap();
        let f = |x: &Matrix| -> f64 {
            net.predict(x).unwrap().data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in 0..x.data().len() {
            let mut up = x.clone();
            up.data_mut()[i] += h;
            let mut down = x.clone();
            down.data_mut()[i] -= h;
            let numeric = (f(&up) - f(&down)) / (2.0 * h);
            prop_assert!((numeric - dx.data()[i]).abs() < 1e-6 * (1.0 + numeric.abs()), "{} vs {}", numeric, dx.data()[i]);
        }
    }
}
