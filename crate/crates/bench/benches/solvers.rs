use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use stochot_core::ot::{exact_ot, ot_1d, sinkhorn};
use stochot_core::rng::{stream, StdRng};
use stochot_core::{DiscreteMeasure, Point};

fn cloud(rng: &mut StdRng, n: usize, d: usize) -> DiscreteMeasure {
    let pts = (0..n)
        .map(|_| Point::new((0..d).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect();
    DiscreteMeasure::uniform(pts).unwrap()
}

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_ot");
    group.sample_size(10);
    for n in [100, 400, 1000] {
        let mut rng = stream(1, &[n as u64]);
        let (mu, nu) = (cloud(&mut rng, n, 3), cloud(&mut rng, n, 3));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| exact_ot(black_box(&mu), black_box(&nu), 1.0).unwrap())
        });
    }
    group.finish();
}

fn entropic(c: &mut Criterion) {
    let mut group = c.benchmark_group("sinkhorn");
    group.sample_size(10);
    let mut rng = stream(2, &[]);
    let (mu, nu) = (cloud(&mut rng, 400, 3), cloud(&mut rng, 400, 3));
    for tau in [0.1, 0.02] {
        group.bench_with_input(BenchmarkId::from_parameter(tau), &tau, |b, &tau| {
            b.iter(|| sinkhorn(black_box(&mu), black_box(&nu), 1.0, tau, 1e-6, 100_000).unwrap())
        });
    }
    group.finish();
}

fn line(c: &mut Criterion) {
    let mut rng = stream(3, &[]);
    let (mu, nu) = (cloud(&mut rng, 10_000, 1), cloud(&mut rng, 10_000, 1));
    c.bench_function("ot_1d/10000", |b| b.iter(|| ot_1d(black_box(&mu), black_box(&nu), 2.0).unwrap()));
}

criterion_group!(benches, exact, entropic, line);
criterion_main!(benches);
