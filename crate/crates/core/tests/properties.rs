use nalgebra::Vector3;
use proptest::prelude::*;
use tbrbf::characteristics::{backtrack, tableau, VelocityField, VelocityKind};
use tbrbf::harness::{convergence_rate, shu_initial, torus_initial};
use tbrbf::{ImplicitSurface, KernelSpec, Surface, SurfaceKind};

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn near(surface: &ImplicitSurface, x: Vector3<f64>, band: f64) -> Option<Vector3<f64>> {
    let p = surface.closest_point(&x).ok()?;
    let d = x - p;
    (d.norm() > 1e-9).then(|| p + d.normalize() * band.min(d.norm()))
}

proptest! {
    #[test]
    fn sphere_projection_lands_on_surface_and_is_idempotent(x in point()) {
        prop_assume!(x.norm() > 1e-3);
        let s = ImplicitSurface::new(SurfaceKind::Sphere);
        let p = s.closest_point(&x).unwrap();
        prop_assert!((p.norm() - 1.0).abs() <= 1e-14);
        let q = s.closest_point(&p).unwrap();
        prop_assert!((q - p).norm() <= 1e-15);
    }

    #[test]
    fn torus_projection_is_orthogonal(x in point(), band in 0.0..0.08f64) {
        let s = ImplicitSurface::new(SurfaceKind::Torus);
        let Some(y) = near(&s, x, band) else { return Ok(()) };
        let p = s.closest_point(&y).unwrap();
        prop_assert!(s.level_value(&p).unwrap().abs() <= 1e-12);
        let n = s.unit_normal(&p).unwrap();
        let d = y - p;
        // the offset is along the normal
        prop_assert!((d - n * n.dot(&d)).norm() <= 1e-10);
        prop_assert!((s.closest_point(&p).unwrap() - p).norm() <= 1e-12);
    }

    #[test]
    fn kkt_agrees_with_closed_form_on_torus(x in point(), band in 0.0..0.05f64) {
        let s = ImplicitSurface::new(SurfaceKind::Torus);
        let Some(y) = near(&s, x, band) else { return Ok(()) };
        let a = s.closest_point(&y).unwrap();
        let b = s.closest_point_kkt(&y).unwrap();
        prop_assert!((a - b).norm() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn signed_distance_is_positive_outside_sphere(x in point()) {
        prop_assume!(x.norm() > 1e-3);
        let s = ImplicitSurface::new(SurfaceKind::Sphere);
        let d = s.signed_distance(&x).unwrap();
        prop_assert!((d - (x.norm() - 1.0)).abs() <= 1e-14);
    }

    #[test]
    fn shape_operator_is_symmetric_and_tangent(x in point()) {
        let s = ImplicitSurface::new(SurfaceKind::Torus);
        let Some(y) = near(&s, x, 0.0) else { return Ok(()) };
        let g = s.local_geometry(&y).unwrap();
        prop_assert!((g.shape - g.shape.transpose()).amax() <= 1e-12);
        prop_assert!((g.shape * g.normal).norm() <= 1e-12);
        prop_assert!((g.shape.trace() - g.mean_curvature).abs() <= 1e-12);
    }

    #[test]
    fn kernel_decreases_with_distance(m in 2u32..8, d in 2usize..4, r in 0.01..8.0f64) {
        let k = KernelSpec::new(m, d).unwrap();
        prop_assert!(k.value(r) > 0.0);
        prop_assert!(k.value(r) < k.value(0.0));
        prop_assert!(k.value(r * 1.1) < k.value(r));
    }

    #[test]
    fn backtracked_points_stay_on_sphere(x in point(), t in 0.0..5.0f64, dt in 1e-3..0.2f64, s in 1usize..4) {
        prop_assume!(x.norm() > 1e-3);
        let sphere = ImplicitSurface::new(SurfaceKind::Sphere);
        let v = VelocityField::new(VelocityKind::SphereSpin);
        let p = sphere.closest_point(&x).unwrap();
        let y = backtrack(&sphere, &v, &[p], t, dt, &tableau(s).unwrap()).unwrap();
        prop_assert!((y[0].norm() - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn power_law_rates_are_recovered(c in 1e-6..1e3f64, p in 0.5..9.0f64, h in 1e-3..0.5f64) {
        let e = |h: f64| c * h.powf(p);
        prop_assert!((convergence_rate(e(h), e(h / 2.0), h, h / 2.0) - p).abs() <= 1e-9);
    }

    #[test]
    fn initial_profiles_are_bounded(th in 0.0..std::f64::consts::TAU, ph in -10.0..10.0f64) {
        let u = shu_initial(th);
        prop_assert!((-2.0..=1.0).contains(&u));
        let v = torus_initial(th, ph);
        prop_assert!((0.0..=2.0).contains(&v));
    }
}
