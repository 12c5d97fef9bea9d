use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::characteristics::torus_angles;
use crate::geometry::AmbientPoint;

const SHU_DELTA: f64 = 0.005;
const SHU_BETA: f64 = 10.0;
const SHU_Z: f64 = 0.3;
const SHU_B: f64 = 1.5;

fn gauss(x: f64, alpha: f64, z: f64) -> f64 {
    (-alpha * (x - z).powi(2)).exp()
}

fn ellipse(x: f64, beta: f64, b: f64) -> f64 {
    (1.0 - beta * beta * (x - b).powi(2)).max(0.0).sqrt()
}

/// Modified Shu multi-wave profile on `[0, 2pi)`: Gaussian, trapezoid,
/// triangle and ellipse pieces.
pub fn shu_initial(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let alpha = 2f64.ln() / (36.0 * SHU_DELTA * SHU_DELTA);
    let x = theta / PI;
    if (0.2 * PI..=0.4 * PI).contains(&theta) {
        (gauss(x, alpha, SHU_Z + SHU_DELTA) + 4.0 * gauss(x, alpha, SHU_Z) + gauss(x, alpha, SHU_Z - SHU_DELTA)) / 6.0
    } else if (1.75..=1.8).contains(&theta) {
        20.0 * theta - 35.0
    } else if (1.8..=2.5).contains(&theta) {
        1.0
    } else if (2.5..=2.65).contains(&theta) {
        -20.0 * theta + 51.0
    } else if (3.0..=3.8).contains(&theta) {
        1.0 - (2.5 * theta - 8.5).abs()
    } else if (1.4 * PI..=1.6 * PI).contains(&theta) {
        (ellipse(x, SHU_BETA, SHU_B + SHU_DELTA) + 4.0 * ellipse(x, SHU_BETA, SHU_B) + ellipse(x, SHU_BETA, SHU_B - SHU_DELTA)) / 6.0
    } else {
        0.0
    }
}

/// `|sin 2theta| + |cos 2phi| - 0.7 |sin 2theta cos 2phi|`.
pub fn torus_initial(theta: f64, phi: f64) -> f64 {
    let s = (2.0 * theta).sin();
    let c = (2.0 * phi).cos();
    s.abs() + c.abs() - 0.7 * (s * c).abs()
}

/// Polar angle of a circle point in `[0, 2pi)`.
pub fn circle_angle(p: &AmbientPoint) -> f64 {
    p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI)
}

pub fn shu_values(nodes: &[AmbientPoint]) -> DVector<f64> {
    DVector::from_iterator(nodes.len(), nodes.iter().map(|p| shu_initial(circle_angle(p))))
}

/// [`torus_initial`] at the azimuth and tube angle of each node.
pub fn torus_values(nodes: &[AmbientPoint]) -> DVector<f64> {
    DVector::from_iterator(
        nodes.len(),
        nodes.iter().map(|p| {
            let (psi, alpha) = torus_angles(p);
            torus_initial(psi, alpha)
        }),
    )
}

/// Independent uniform `[-0.5, 0.5]` values for `u` and `w` on nodes with
/// `|z| < width / 2`, zero elsewhere.
pub fn turing_strip(nodes: &[AmbientPoint], width: f64, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DVector::zeros(nodes.len());
    let mut w = DVector::zeros(nodes.len());
    for (i, p) in nodes.iter().enumerate() {
        if p[2].abs() < 0.5 * width {
            u[i] = rng.random_range(-0.5..=0.5);
            w[i] = rng.random_range(-0.5..=0.5);
        }
    }
    (u, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    #[test]
    fn shu_examples() {
        assert_eq!(shu_initial(2.0), 1.0);
        assert_eq!(shu_initial(3.4), 1.0);
        assert_eq!(shu_initial(0.0), 0.0);
        assert_eq!(shu_initial(2.8), 0.0);
        assert_relative_eq!(shu_initial(1.775), 0.5, epsilon = 1e-12);
        // printed branch, kept as is: 1 at 2.5 falling to -2 at 2.65
        assert_relative_eq!(shu_initial(2.6), -1.0, epsilon = 1e-12);
        assert_eq!(shu_initial(2.5), 1.0);
        assert_eq!(shu_initial(3.0), 0.0);
        // Gaussian peak at theta/pi = 0.3
        let g = shu_initial(0.3 * PI);
        assert!(g > 0.9 && g < 1.0, "{g}");
        // ellipse peak at theta/pi = 1.5
        let e = shu_initial(1.5 * PI);
        assert!(e > 0.99 && e <= 1.0, "{e}");
    }

    #[test]
    fn shu_is_continuous_at_joins_except_2_65() {
        for t in [1.75, 1.8, 2.5, 3.0, 3.8] {
            let h = 1e-9;
            assert!((shu_initial(t - h) - shu_initial(t + h)).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn torus_examples() {
        assert_eq!(torus_initial(0.0, 0.0), 1.0);
        assert_relative_eq!(torus_initial(PI / 4.0, 0.0), 1.3, epsilon = 1e-15);
        assert_relative_eq!(torus_initial(PI / 4.0, PI / 4.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn strip_is_seeded_and_local() {
        let pts: Vec<_> = (0..200)
            .map(|k| {
                let z = -1.0 + 2.0 * (k as f64 + 0.5) / 200.0;
                let r = (1.0 - z * z).sqrt();
                Vector3::new(r * (k as f64).cos(), r * (k as f64).sin(), z)
            })
            .collect();
        let (u1, w1) = turing_strip(&pts, 0.2, 7);
        let (u2, w2) = turing_strip(&pts, 0.2, 7);
        assert_eq!((&u1, &w1), (&u2, &w2));
        let (u3, _) = turing_strip(&pts, 0.2, 8);
        assert_ne!(u1, u3);
        for (p, (u, w)) in pts.iter().zip(u1.iter().zip(w1.iter())) {
            if p[2].abs() >= 0.1 {
                assert_eq!((*u, *w), (0.0, 0.0));
            } else {
                assert!(u.abs() <= 0.5 && w.abs() <= 0.5);
            }
        }
        assert!(u1.iter().filter(|v| **v != 0.0).count() >= 15);
    }
}
