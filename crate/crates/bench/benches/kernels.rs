use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use novelty_bench::{clustered_rows, gray_levels, random_graph};
use novelty_core::fisher::fisher_vector;
use novelty_core::gmm::fit_gmm;
use novelty_core::imgfeat::haralick::{haralick_features, LEVELS};
use novelty_core::FitConfig;

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_gmm");
    group.sample_size(10);
    for &(n, d, k) in &[(1000, 16, 4), (2000, 64, 16)] {
        let data = clustered_rows(n, d, k, 1);
        let cfg = FitConfig {
            n_components: k,
            max_iters: 50,
            ..FitConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{d}/k{k}")), &data, |b, data| {
            b.iter(|| fit_gmm(black_box(data.view()), &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_fisher(c: &mut Criterion) {
    let data = clustered_rows(1000, 64, 16, 2);
    let gm = fit_gmm(
        data.view(),
        &FitConfig {
            n_components: 16,
            max_iters: 30,
            ..FitConfig::default()
        },
    )
    .unwrap();
    c.bench_function("fisher_vector/64d/k16", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % data.nrows();
            fisher_vector(&gm, black_box(data.row(i))).unwrap().norm()
        })
    });
}

fn bench_haralick(c: &mut Criterion) {
    let mut group = c.benchmark_group("haralick");
    for side in [64, 256] {
        let q = gray_levels(side, LEVELS, 3);
        group.bench_with_input(BenchmarkId::from_parameter(side), &q, |b, q| {
            b.iter(|| haralick_features(black_box(q), LEVELS).unwrap())
        });
    }
    group.finish();
}

fn bench_closeness(c: &mut Criterion) {
    let mut group = c.benchmark_group("closeness");
    for n in [500, 5000] {
        let g = random_graph(n, 4, 4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            let mut u = 0;
            b.iter(|| {
                u = (u + 1) % n;
                g.closeness_at(black_box(u))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_fisher, bench_haralick, bench_closeness);
criterion_main!(benches);
