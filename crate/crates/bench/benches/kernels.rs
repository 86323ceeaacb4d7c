use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dicca_core::cca::fit_cca;
use dicca_core::linalg::{svd, Matrix};
use dicca_core::model::{elbo_grad, DiccaConfig, DiccaParams, ElboNoise, EncoderTemplate, ObjectiveWeights};
use dicca_core::nn::{LayerKind, Network};
use dicca_core::optim::{TrainOptions, Trainer};
use dicca_core::rng::stream_rng;

/// Deterministic, well-spread entries without pulling in a sampler.
fn filled(rows: usize, cols: usize, salt: u64) -> Matrix {
    Matrix::from_fn(rows, cols, |r, c| ((r * 7919 + c * 104_729 + salt as usize) as f64 * 0.618).sin())
}

fn linalg(c: &mut Criterion) {
    let mut g = c.benchmark_group("svd");
    for (rows, cols) in [(20, 20), (200, 40), (784, 20)] {
        let a = filled(rows, cols, 1);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{rows}x{cols}")), &a, |b, a| {
            b.iter(|| svd(black_box(a)).unwrap())
        });
    }
    g.finish();

    let x1 = filled(500, 8, 2);
    let x2 = x1.matmul(&filled(8, 6, 3)).add(&filled(500, 6, 4).scale(0.5));
    c.bench_function("fit_cca 500x8 / 500x6", |b| b.iter(|| fit_cca(black_box(&x1), black_box(&x2), 6, 1e-6).unwrap()));
}

fn network(c: &mut Criterion) {
    let kinds = [
        LayerKind::Affine { input: 784, output: 128 },
        LayerKind::Softplus,
        LayerKind::Affine { input: 128, output: 20 },
    ];
    let net = Network::init(784, &kinds, &mut stream_rng(0, 0)).unwrap();
    let x = filled(128, 784, 5);
    let dy = filled(128, 20, 6);
    c.bench_function("mlp forward 128x784", |b| b.iter(|| net.forward(black_box(&x)).unwrap()));
    let (_, tape) = net.forward(&x).unwrap();
    c.bench_function("mlp backward 128x784", |b| b.iter(|| net.backward(black_box(&tape), black_box(&dy)).unwrap()));
}

fn synthetic_config() -> DiccaConfig {
    DiccaConfig::new(vec![20, 20, 20], 4, vec![2, 2, 2])
}

fn mnist_config() -> DiccaConfig {
    let mut cfg = DiccaConfig::new(vec![784, 784], 10, vec![10, 10]);
    cfg.gen_input_dims = Some(vec![128, 128]);
    cfg.encoder = EncoderTemplate::Mlp { width: 128, depth: 1 };
    cfg
}

fn objective(c: &mut Criterion) {
    let mut g = c.benchmark_group("elbo_grad");
    g.sample_size(20);
    for (name, cfg, batch) in [("synthetic b500", synthetic_config(), 500), ("mnist b128", mnist_config(), 128)] {
        let params = DiccaParams::init(&cfg, 0).unwrap();
        let x: Vec<Matrix> = cfg.dims.iter().enumerate().map(|(m, &d)| filled(batch, d, m as u64)).collect();
        let noise = ElboNoise::sample(&cfg, batch, &mut stream_rng(1, 0));
        let w = ObjectiveWeights { data: 1.0 / batch as f64, ..ObjectiveWeights::FULL };
        g.bench_function(name, |b| b.iter(|| elbo_grad(&cfg, &params, black_box(&x), &noise, &w, false).unwrap()));
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let cfg = mnist_config();
    let params = DiccaParams::init(&cfg, 0).unwrap();
    let x: Vec<Matrix> = cfg.dims.iter().enumerate().map(|(m, &d)| filled(128, d, 10 + m as u64)).collect();
    let noise = ElboNoise::sample(&cfg, 128, &mut stream_rng(2, 0));
    let opts = TrainOptions { lr: 1e-4, ..Default::default() };
    let mut g = c.benchmark_group("trainer");
    g.sample_size(20);
    g.bench_function("step mnist b128", |b| {
        b.iter_batched(
            || Trainer::new(&cfg, params.clone(), 1600, opts).unwrap(),
            |mut t| t.step(&x, &noise, (1, 1)).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, linalg, network, objective, train_step);
criterion_main!(benches);
