use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tbrbf::kernels::{assemble, fit_coefficients, kernel_matrix};
use tbrbf::{KernelSpec, SurfaceKind};
use tbrbf_bench::{nodes, smooth_data};

fn matern(c: &mut Criterion) {
    let mut g = c.benchmark_group("matern_value");
    for (m, d) in [(2, 3), (4, 2), (5, 2), (6, 3)] {
        let k = KernelSpec::new(m, d).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("m{m}_d{d}")), &k, |b, k| {
            b.iter(|| (1..=64).map(|i| k.value(black_box(i as f64 * 0.1))).sum::<f64>())
        });
    }
    g.finish();
}

fn collocation(c: &mut Criterion) {
    let mut g = c.benchmark_group("collocation");
    g.sample_size(10);
    for n in [200, 500] {
        let (s, pts) = nodes(SurfaceKind::Circle, n);
        let spec = KernelSpec::with_scale(5, 2, 0.1414).unwrap();
        g.bench_with_input(BenchmarkId::new("kernel_matrix_circle", n), &pts, |b, p| b.iter(|| kernel_matrix(&spec, p, p)));
        g.bench_with_input(BenchmarkId::new("assemble_circle", n), &pts, |b, p| b.iter(|| assemble(&spec, &s, p, p).unwrap()));
    }
    let (s, pts) = nodes(SurfaceKind::Sphere, 1000);
    let spec = KernelSpec::with_scale(4, 3, 0.1414).unwrap();
    g.bench_function("assemble_sphere_1000", |b| b.iter(|| assemble(&spec, &s, &pts, &pts).unwrap()));
    let sys = assemble(&spec, &s, &pts, &pts).unwrap();
    let u = smooth_data(&pts);
    g.bench_function("fit_sphere_1000", |b| b.iter(|| fit_coefficients(&sys, &u).unwrap()));
    g.finish();
}

criterion_group!(benches, matern, collocation);
criterion_main!(benches);
