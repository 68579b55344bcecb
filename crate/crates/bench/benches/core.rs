use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gausstest_core::{
    estimate_power, higher_criticism_statistic, lr_power_beta, p_norm, CalibrationMethod, LrPowerQuery,
    ParameterPoint, RngStream, Statistic, TestSpec,
};
use std::hint::black_box;

fn normals(c: &mut Criterion) {
    let mut g = c.benchmark_group("standard_normal");
    let mut out = vec![0.0; 4096];
    g.throughput(Throughput::Elements(out.len() as u64));
    g.bench_function("fill_4096", |b| {
        let mut rng = RngStream::root(1).generator();
        b.iter(|| rng.fill_standard_normal(black_box(&mut out)))
    });
    g.finish();
}

fn statistics(c: &mut Criterion) {
    let mut g = c.benchmark_group("statistic");
    for d in [64usize, 1024] {
        let mut y = vec![0.0; d];
        RngStream::root(2).generator().fill_standard_normal(&mut y);
        g.throughput(Throughput::Elements(d as u64));
        for (name, p) in [("p=1", 1.0), ("p=2", 2.0), ("p=4", 4.0), ("p=inf", f64::INFINITY)] {
            g.bench_with_input(BenchmarkId::new(name, d), &y, |b, y| b.iter(|| p_norm(black_box(y), p)));
        }
        g.bench_with_input(BenchmarkId::new("hc", d), &y, |b, y| {
            b.iter(|| higher_criticism_statistic(black_box(y)))
        });
    }
    g.finish();
}

fn lr_beta(c: &mut Criterion) {
    let mut g = c.benchmark_group("lr_power_beta");
    for d in [10usize, 1000, 100_000] {
        let q = LrPowerQuery { d, alpha: 0.05, r: (d as f64).powf(0.25) * 1.5 };
        g.bench_with_input(BenchmarkId::from_parameter(d), &q, |b, q| b.iter(|| lr_power_beta(black_box(q))));
    }
    g.finish();
}

fn power(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_power");
    g.sample_size(10);
    let d = 256;
    let n = 10_000;
    let theta = ParameterPoint::new(vec![0.2; d]).unwrap();
    g.throughput(Throughput::Elements(n));
    for (name, statistic) in [("p=2", Statistic::p_norm(2.0)), ("p=inf", Statistic::p_norm(f64::INFINITY))] {
        let (spec, _) = TestSpec::calibrated(statistic, d, 0.05, CalibrationMethod::Exact, RngStream::root(3)).unwrap();
        g.bench_function(BenchmarkId::new(name, d), |b| {
            b.iter(|| estimate_power(&spec, &theta, n, RngStream::root(4)))
        });
    }
    g.finish();
}

criterion_group!(benches, normals, statistics, lr_beta, power);
criterion_main!(benches);
