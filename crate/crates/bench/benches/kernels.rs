use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use sugar_core::genlearn::{entropic_ot, half_sq_cost, sinkhorn_divergence_grad, FeatureMap, PseudoSampleBlock};
use sugar_core::nn::{Activation, Mlp};
use sugar_core::seed;
use sugar_core::structural::{acyclicity, expm};
use sugar_core::testkit::{per_observation_products, transform_bank};

fn random(rows: usize, cols: usize, seed_value: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed_value);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
}

fn mlp(c: &mut Criterion) {
    let net = Mlp::init(&[6, 32, 32, 1], Activation::Relu, 1).unwrap();
    let x = random(256, 6, 2);
    let up = random(256, 1, 3);
    c.bench_function("mlp_forward_256x6", |b| b.iter(|| net.forward_batch(black_box(x.view())).unwrap()));
    c.bench_function("mlp_backward_256x6", |b| {
        b.iter(|| net.backward_batch(black_box(x.view()), up.view()).unwrap())
    });
}

fn sinkhorn(c: &mut Criterion) {
    let a = random(256, 2, 4);
    let b = random(256, 2, 5);
    let cost = half_sq_cost(a.view(), b.view());
    c.bench_function("entropic_ot_256", |bch| {
        bch.iter(|| entropic_ot(black_box(cost.view()), 0.05, 50, true).unwrap())
    });
    let critic = Mlp::init(&[2, 16, 8], Activation::Relu, 6).unwrap();
    c.bench_function("sinkhorn_divergence_grad_256", |bch| {
        bch.iter(|| sinkhorn_divergence_grad(a.view(), b.view(), FeatureMap::Critic(&critic), 0.05, 50).unwrap())
    });
}

fn matrix_exponential(c: &mut Criterion) {
    let w = random(20, 20, 7) * 0.3;
    c.bench_function("expm_20", |b| b.iter(|| expm(black_box(&w))));
    c.bench_function("acyclicity_20", |b| b.iter(|| acyclicity(black_box(&w)).unwrap()));
}

fn products(c: &mut Criterion) {
    let n = 1000;
    let residual = Array1::from_iter(random(n, 1, 8).into_iter());
    let xk = Array1::from_iter(random(n, 1, 9).into_iter());
    let pseudo = PseudoSampleBlock::new(random(n, 100, 10)).unwrap();
    let bank = transform_bank(200, 11).unwrap();
    c.bench_function("products_1000x100x200", |b| {
        b.iter(|| per_observation_products(residual.view(), xk.view(), black_box(&pseudo), &bank).unwrap())
    });
}

criterion_group!(benches, mlp, sinkhorn, matrix_exponential, products);
criterion_main!(benches);
