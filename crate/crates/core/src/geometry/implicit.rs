use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use super::{tangent_projector, AmbientPoint, LocalGeometry, Surface};
use crate::error::{Error, Result};

pub const TORUS_R: f64 = 1.0;
pub const TORUS_TUBE: f64 = 1.0 / 3.0;

const CP_TOL: f64 = 1e-12;
const CP_MAX_ITER: usize = 50;
const GRAD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    /// Unit circle in the plane.
    Circle,
    /// Unit sphere.
    Sphere,
    /// Ring torus with R = 1, r = 1/3.
    Torus,
    /// Genus-two "bretzel".
    Bretzel2,
    /// Four-focus constant product of distances surface.
    Cpd,
    /// The plane z = 0. Test fixture only.
    Plane,
}

impl SurfaceKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "circle" => SurfaceKind::Circle,
            "sphere" => SurfaceKind::Sphere,
            "torus" => SurfaceKind::Torus,
            "bretzel2" | "bretzel" => SurfaceKind::Bretzel2,
            "cpd" => SurfaceKind::Cpd,
            "plane" => SurfaceKind::Plane,
            _ => return None,
        })
    }

    /// A quarter of the smallest radius of curvature. Bretzel2 and CPD values
    /// come from sampling principal curvatures on a few thousand surface points.
    fn default_tube_radius(self) -> f64 {
        match self {
            SurfaceKind::Circle | SurfaceKind::Sphere => 0.25,
            SurfaceKind::Torus => 0.25 * TORUS_TUBE,
            SurfaceKind::Bretzel2 => 0.25 * 3.5e-3,
            SurfaceKind::Cpd => 0.25 * 0.135,
            SurfaceKind::Plane => 1.0,
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SurfaceKind::Circle => "circle",
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::Torus => "torus",
            SurfaceKind::Bretzel2 => "bretzel2",
            SurfaceKind::Cpd => "cpd",
            SurfaceKind::Plane => "plane",
        };
        f.write_str(s)
    }
}

/// Level value with first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSet {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

/// Zero level set of one of the analytic surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitSurface {
    pub kind: SurfaceKind,
    tube_radius: f64,
}

impl ImplicitSurface {
    pub fn new(kind: SurfaceKind) -> Self {
        ImplicitSurface {
            kind,
            tube_radius: kind.default_tube_radius(),
        }
    }

    pub fn with_tube_radius(mut self, delta: f64) -> Self {
        assert!(delta > 0.0, "tube radius must be positive");
        self.tube_radius = delta;
        self
    }

    pub fn level_and_gradient(&self, x: &AmbientPoint) -> LevelSet {
        let (px, py, pz) = (x[0], x[1], x[2]);
        match self.kind {
            SurfaceKind::Circle => LevelSet {
                value: px * px + py * py - 1.0,
                gradient: Vector3::new(2.0 * px, 2.0 * py, 0.0),
                hessian: Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 0.0)),
            },
            SurfaceKind::Sphere => LevelSet {
                value: x.norm_squared() - 1.0,
                gradient: 2.0 * x,
                hessian: Matrix3::identity() * 2.0,
            },
            SurfaceKind::Plane => LevelSet {
                value: pz,
                gradient: Vector3::z(),
                hessian: Matrix3::zeros(),
            },
            SurfaceKind::Torus => {
                let rr = 4.0 * TORUS_R * TORUS_R;
                let a = x.norm_squared() + TORUS_R * TORUS_R - TORUS_TUBE * TORUS_TUBE;
                let value = a * a - rr * (px * px + py * py);
                let gradient = 4.0 * a * x - 2.0 * rr * Vector3::new(px, py, 0.0);
                let hessian = 8.0 * x * x.transpose() + Matrix3::identity() * (4.0 * a)
                    - Matrix3::from_diagonal(&Vector3::new(2.0 * rr, 2.0 * rr, 0.0));
                LevelSet {
                    value,
                    gradient,
                    hessian,
                }
            }
            SurfaceKind::Bretzel2 => {
                let q = px * px * (1.0 - px * px) + py * py;
                let dq = Vector3::new(2.0 * px - 4.0 * px.powi(3), 2.0 * py, 0.0);
                let d2q = Matrix3::from_diagonal(&Vector3::new(2.0 - 12.0 * px * px, 2.0, 0.0));
                let value = q * q + 0.5 * pz * pz - x.norm_squared() / 40.0 - 1.0 / 40.0;
                let gradient = 2.0 * q * dq + Vector3::new(0.0, 0.0, pz) - x / 20.0;
                let hessian = 2.0 * dq * dq.transpose() + 2.0 * q * d2q
                    + Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 1.0))
                    - Matrix3::identity() / 20.0;
                LevelSet {
                    value,
                    gradient,
                    hessian,
                }
            }
            SurfaceKind::Cpd => {
                let foci = [
                    Vector3::new(1.0, 0.0, 0.0),
                    Vector3::new(-1.0, 0.0, 0.0),
                    Vector3::new(0.0, 1.0, 0.0),
                    Vector3::new(0.0, -1.0, 0.0),
                ];
                let mut dist = [0.0; 4];
                let mut unit = [Vector3::zeros(); 4];
                for (i, c) in foci.iter().enumerate() {
                    let e = x - c;
                    dist[i] = e.norm();
                    unit[i] = e / dist[i];
                }
                let prod: f64 = dist.iter().product();
                let mut gradient = Vector3::zeros();
                let mut hessian = Matrix3::zeros();
                for i in 0..4 {
                    let pi = prod / dist[i];
                    gradient += pi * unit[i];
                    hessian += (pi / dist[i]) * (Matrix3::identity() - unit[i] * unit[i].transpose());
                    for k in 0..4 {
                        if k != i {
                            hessian += (pi / dist[k]) * unit[i] * unit[k].transpose();
                        }
                    }
                }
                LevelSet {
                    value: prod - 1.1,
                    gradient,
                    hessian,
                }
            }
        }
    }

    /// Closest point by Newton's method on the optimality system of
    /// `min |p - x|^2  s.t.  F(p) = 0`.
    pub fn closest_point_kkt(&self, x: &AmbientPoint) -> Result<AmbientPoint> {
        let no_conv = |it| Error::NoConvergence {
            iterations: it,
            point: [x[0], x[1], x[2]],
        };
        let ls = self.level_and_gradient(x);
        let g2 = ls.gradient.norm_squared();
        if g2 < GRAD_EPS * GRAD_EPS {
            return Err(no_conv(0));
        }
        let mut p = x - ls.gradient * (ls.value / g2);
        let planar = self.kind == SurfaceKind::Circle;
        if planar {
            p[2] = x[2];
        }
        let lp = self.level_and_gradient(&p);
        let mut mu = -(p - x).dot(&lp.gradient) / lp.gradient.norm_squared().max(f64::MIN_POSITIVE);

        for it in 0..CP_MAX_ITER {
            let l = self.level_and_gradient(&p);
            let stat = p - x + mu * l.gradient;
            let scale = 1.0 + (p - x).norm();
            if l.value.abs() <= 0.1 * CP_TOL && stat.norm() <= 0.1 * CP_TOL * scale {
                return Ok(p);
            }
            let mut jac = Matrix4::zeros();
            let top = Matrix3::identity() + mu * l.hessian;
            jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
            jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&l.gradient);
            jac.fixed_view_mut::<1, 3>(3, 0).copy_from(&l.gradient.transpose());
            let rhs = -Vector4::new(stat[0], stat[1], stat[2], l.value);
            let step = jac.lu().solve(&rhs).ok_or_else(|| no_conv(it))?;
            p += step.fixed_rows::<3>(0);
            mu += step[3];
            if !p.iter().all(|c| c.is_finite()) {
                return Err(no_conv(it));
            }
            if step.fixed_rows::<3>(0).norm() <= 1e-15 * (1.0 + p.norm()) {
                let v = self.level_and_gradient(&p).value;
                if v.abs() <= CP_TOL {
                    return Ok(p);
                }
            }
        }
        Err(no_conv(CP_MAX_ITER))
    }

    fn closest_point_closed_form(&self, x: &AmbientPoint) -> Option<AmbientPoint> {
        match self.kind {
            SurfaceKind::Circle => {
                let rho = x[0].hypot(x[1]);
                (rho > 0.0).then(|| Vector3::new(x[0] / rho, x[1] / rho, 0.0))
            }
            SurfaceKind::Sphere => {
                let n = x.norm();
                (n > 0.0).then(|| x / n)
            }
            SurfaceKind::Plane => Some(Vector3::new(x[0], x[1], 0.0)),
            SurfaceKind::Torus => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return None;
                }
                let c = Vector3::new(TORUS_R * x[0] / rho, TORUS_R * x[1] / rho, 0.0);
                let e = x - c;
                let en = e.norm();
                (en > 0.0).then(|| c + e * (TORUS_TUBE / en))
            }
            SurfaceKind::Bretzel2 | SurfaceKind::Cpd => None,
        }
    }
}

impl Surface for ImplicitSurface {
    fn dim(&self) -> usize {
        if self.kind == SurfaceKind::Circle {
            2
        } else {
            3
        }
    }

    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    /// Closed-form projections for the circle, sphere, plane and torus; the
    /// Newton iteration otherwise.
    fn closest_point(&self, x: &AmbientPoint) -> Result<AmbientPoint> {
        match self.kind {
            SurfaceKind::Bretzel2 | SurfaceKind::Cpd => self.closest_point_kkt(x),
            _ => self.closest_point_closed_form(x).ok_or(Error::NoConvergence {
                iterations: 0,
                point: [x[0], x[1], x[2]],
            }),
        }
    }

    fn local_geometry(&self, p: &AmbientPoint) -> Result<LocalGeometry> {
        let ls = self.level_and_gradient(p);
        let g = ls.gradient.norm();
        if g < GRAD_EPS {
            return Err(Error::DegenerateGradient {
                norm: g,
                point: [p[0], p[1], p[2]],
            });
        }
        let normal = ls.gradient / g;
        let proj = tangent_projector(&normal);
        let shape = proj * ls.hessian * proj / g;
        let trace = if self.dim() == 2 {
            ls.hessian[(0, 0)] + ls.hessian[(1, 1)]
        } else {
            ls.hessian.trace()
        };
        let mean_curvature = (trace - normal.dot(&(ls.hessian * normal))) / g;
        Ok(LocalGeometry {
            normal,
            mean_curvature,
            shape,
        })
    }

    fn level_value(&self, x: &AmbientPoint) -> Option<f64> {
        Some(self.level_and_gradient(x).value)
    }
}
