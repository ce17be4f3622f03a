use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rwre_core::limitlaws::{fit_b, stable_cdf};
use rwre_core::StableParams;

fn bench_cdf(c: &mut Criterion) {
    let mut group = c.benchmark_group("stable_cdf");
    for kappa in [0.7, 1.0, 1.5, 2.0] {
        let p = StableParams::new(kappa, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(kappa), &p, |b, &p| {
            b.iter(|| stable_cdf(p, black_box(0.8)).unwrap())
        });
    }
    group.bench_function("far_left_tail_1.5", |b| {
        let p = StableParams::new(1.5, 1.0).unwrap();
        b.iter(|| stable_cdf(p, black_box(-12.0)).unwrap())
    });
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let samples: Vec<f64> = (1..2000).map(|i| -4.0 + 10.0 * i as f64 / 2000.0).collect();
    let mut group = c.benchmark_group("fit_b");
    group.sample_size(10);
    group.bench_function("kappa_1.5_2k", |b| b.iter(|| fit_b(black_box(&samples), 1.5).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_cdf, bench_fit);
criterion_main!(benches);
