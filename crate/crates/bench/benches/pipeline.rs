use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scengen_bench::{archive, fixture, marginals, network, scores};
use scengen_core::bnet::learn_structure;
use scengen_core::data::{add_months, month_range};
use scengen_core::marginal::{fit_kde, Support};
use scengen_core::pipeline::{horizon, simulate_monthly};
use scengen_core::{disaggregate, forward, inverse, sample_network, ProfileLibrary};

fn bench_marginal(c: &mut Criterion) {
    let fx = fixture(8, 30, false);
    let x = fx.monthly.observed(fx.monthly.n_stations() - 1);
    let m = fit_kde(&x, Support::interval(0.0, 1.0)).unwrap();
    c.bench_function("kde fit 360", |b| {
        b.iter(|| fit_kde(black_box(&x), Support::interval(0.0, 1.0)).unwrap())
    });
    c.bench_function("kde quantile", |b| b.iter(|| m.quantile(black_box(0.37))));
}

fn bench_transform(c: &mut Criterion) {
    let fx = fixture(8, 30, false);
    let ms = marginals(&fx);
    let z = forward(&fx.monthly, &ms).unwrap();
    c.bench_function("forward 8x360", |b| b.iter(|| forward(black_box(&fx.monthly), &ms).unwrap()));
    c.bench_function("inverse 8x360", |b| b.iter(|| inverse(black_box(&z), &ms).unwrap()));
}

fn bench_structure(c: &mut Criterion) {
    let mut g = c.benchmark_group("structure");
    g.sample_size(10);
    for n in [8, 20] {
        let z = scores(&fixture(n, 30, false));
        g.bench_with_input(BenchmarkId::from_parameter(n), &z, |b, z| {
            b.iter(|| learn_structure(z, 6, 5, 42).unwrap())
        });
    }
    g.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let fx = fixture(10, 30, false);
    let net = network(&fx, 6);
    let start = add_months(*fx.monthly.index().last().unwrap(), 1);
    let h = month_range(start, 12);
    let mut g = c.benchmark_group("sampling");
    g.sample_size(20);
    g.bench_function("network 100x12", |b| b.iter(|| sample_network(&net, 100, &h, None, 7).unwrap()));
    g.finish();
}

fn bench_disagg(c: &mut Criterion) {
    let fx = fixture(10, 30, true);
    let a = archive(&fx);
    let model = a.disagg.as_ref().unwrap();
    let lib = ProfileLibrary::from_panel(fx.hourly.as_ref().unwrap(), &model.station_ids()).unwrap();
    let h = horizon(&scengen_bench::config(), &a).unwrap();
    let monthly = simulate_monthly(&a, 100, &h, None, 7).unwrap();
    let mut g = c.benchmark_group("disagg");
    g.sample_size(10);
    g.bench_function("100x12", |b| b.iter(|| disaggregate(black_box(&monthly), model, &lib).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_marginal, bench_transform, bench_structure, bench_sampling, bench_disagg);
criterion_main!(benches);
