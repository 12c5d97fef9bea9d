use criterion::{criterion_group, criterion_main, Criterion};
use tbrbf::characteristics::{backtrack, tableau, VelocityField, VelocityKind};
use tbrbf::solver::{Scheme, SchemeConfig, Solver, TuringParams};
use tbrbf::{KernelSpec, SurfaceKind};
use tbrbf_bench::{nodes, smooth_data};

fn backtracking(c: &mut Criterion) {
    let (torus, pts) = nodes(SurfaceKind::Torus, 3000);
    let v = VelocityField::new(VelocityKind::TorusKnot32);
    let tab = tableau(2).unwrap();
    let dt = std::f64::consts::PI / 500.0;
    c.bench_function("backtrack_torus_3000_rk2", |b| b.iter(|| backtrack(&torus, &v, &pts, 1.0, dt, &tab).unwrap()));
}

fn stepping(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    g.sample_size(10);

    let (circle, pts) = nodes(SurfaceKind::Circle, 500);
    let u0 = smooth_data(&pts);
    for scheme in [Scheme::Cn, Scheme::Bdf2, Scheme::EulerianKansa] {
        let conf = SchemeConfig::new(scheme, 0.01, 1e-3, KernelSpec::with_scale(4, 2, 0.1414).unwrap(), 1.0).unwrap();
        let v = VelocityField::new(VelocityKind::CircleRotation);
        let mut solver = Solver::new(&circle, v, conf, &pts).unwrap();
        let state = solver.initial_state(std::slice::from_ref(&u0)).unwrap();
        // warm the factorization and feet caches
        let warm = solver.step(&state).unwrap();
        g.bench_function(format!("circle_500_{scheme}"), |b| b.iter(|| solver.step(&warm).unwrap()));
    }

    let (sphere, pts) = nodes(SurfaceKind::Sphere, 1000);
    let u0 = smooth_data(&pts);
    let conf = SchemeConfig::new(Scheme::Cn, 0.5, 0.0, KernelSpec::with_scale(4, 3, 0.1414).unwrap(), 10.0).unwrap();
    let mut solver = Solver::new(&sphere, VelocityField::new(VelocityKind::SphereSpin), conf, &pts)
        .unwrap()
        .with_turing(TuringParams::new(6.5e-3, 0.02, 0.2))
        .unwrap();
    let state = solver.initial_state(&[u0.clone() * 0.1, u0 * -0.1]).unwrap();
    let warm = solver.step(&state).unwrap();
    g.bench_function("turing_sphere_1000", |b| b.iter(|| solver.step(&warm).unwrap()));
    g.finish();
}

criterion_group!(benches, backtracking, stepping);
criterion_main!(benches);
