//! Throughput of the main numerical kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ellflow::bessel::{critical_coupling, decay_series};
use ellflow::{
    circle_contour, dilated_ellipse_contour, evolve_norm, find_zeta_star, kernel_general, solve_b, trace_fg,
    Orientation,
};
use ellflow_bench::{block_profile, elliptic_matrix, elliptic_profile, outside_points, RHO};

fn dyson(c: &mut Criterion) {
    let points = outside_points();
    let mut group = c.benchmark_group("solve_b");
    for n in [16, 256] {
        let p = block_profile(n);
        group.bench_with_input(BenchmarkId::new("block", n), &p, |b, p| {
            b.iter(|| points.iter().map(|&z| solve_b(z, p, 1e-12).unwrap().residual).sum::<f64>())
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let points = outside_points();
    let p = block_profile(64);
    c.bench_function("kernel_general/block_64", |b| {
        b.iter(|| points.iter().map(|&z| kernel_general(z, z.conj(), &p).unwrap().value).sum::<ellflow::C64>())
    });
}

fn series(c: &mut Criterion) {
    let g = critical_coupling(RHO);
    let mut group = c.benchmark_group("decay_series");
    for t in [10.0, 200.0] {
        group.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| decay_series(black_box(RHO), g, t, 1e-15).unwrap().value)
        });
    }
    group.finish();
}

fn double_trace(c: &mut Criterion) {
    let g = 0.6;
    let ft = |z: ellflow::C64| ((z * g - 1.0) * 5.0).exp();
    let mut group = c.benchmark_group("trace_fg");
    let p = elliptic_profile(4);
    let e = dilated_ellipse_contour(RHO, 0.05, 512, Orientation::Ccw).unwrap();
    group.bench_function("elliptic_512", |b| b.iter(|| trace_fg(&e, ft, ft, &p).unwrap()));
    let q = block_profile(16);
    let circ = circle_contour(find_zeta_star(&q, 1e-12).unwrap() * 1.05, 256, Orientation::Ccw).unwrap();
    group.bench_function("block_256", |b| b.iter(|| trace_fg(&circ, ft, ft, &q).unwrap()));
    group.finish();
}

fn evolution(c: &mut Criterion) {
    let times: Vec<f64> = (0..=20).map(|k| k as f64).collect();
    let mut group = c.benchmark_group("evolve_norm");
    group.sample_size(10);
    for n in [100, 400] {
        let x = elliptic_matrix(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| evolve_norm(x, 0.6, &times).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dyson, kernel, series, double_trace, evolution);
criterion_main!(benches);
