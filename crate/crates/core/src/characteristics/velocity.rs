use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::Result;
use crate::geometry::{AmbientPoint, Surface, TORUS_R, TORUS_TUBE};

pub type VelocityFn = dyn Fn(&AmbientPoint, f64) -> Vector3<f64> + Send + Sync;

/// Speed of the `N x axis` spin fields.
pub const SPIN_SPEED: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VelocityKind {
    Zero,
    /// `(-y, x)` on the unit circle.
    CircleRotation,
    /// `0.01 N x (0, 0, -1)`.
    SphereSpin,
    /// Flow along the (3,2) torus knot, period 2π.
    TorusKnot32,
    /// `0.01 N x (-1, 0, 0)`.
    Bretzel2Spin,
    /// `0.01 N x (0, 1, 0)`.
    CpdSpin,
    /// `0.01 N x (0, 0, 1)`.
    CloudSpin,
    Custom,
}

impl VelocityKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "zero" | "none" => VelocityKind::Zero,
            "circlerotation" | "rotation" => VelocityKind::CircleRotation,
            "spherespin" => VelocityKind::SphereSpin,
            "torusknot" | "torusknot32" => VelocityKind::TorusKnot32,
            "bretzel2spin" => VelocityKind::Bretzel2Spin,
            "cpdspin" => VelocityKind::CpdSpin,
            "cloudspin" => VelocityKind::CloudSpin,
            _ => return None,
        })
    }

    fn spin_axis(self) -> Option<Vector3<f64>> {
        match self {
            VelocityKind::SphereSpin => Some(Vector3::new(0.0, 0.0, -1.0)),
            VelocityKind::Bretzel2Spin => Some(Vector3::new(-1.0, 0.0, 0.0)),
            VelocityKind::CpdSpin => Some(Vector3::new(0.0, 1.0, 0.0)),
            VelocityKind::CloudSpin => Some(Vector3::new(0.0, 0.0, 1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for VelocityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VelocityKind::Zero => "zero",
            VelocityKind::CircleRotation => "circle-rotation",
            VelocityKind::SphereSpin => "sphere-spin",
            VelocityKind::TorusKnot32 => "torus-knot",
            VelocityKind::Bretzel2Spin => "bretzel2-spin",
            VelocityKind::CpdSpin => "cpd-spin",
            VelocityKind::CloudSpin => "cloud-spin",
            VelocityKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A tangential velocity field on a surface.
#[derive(Clone)]
pub struct VelocityField {
    pub kind: VelocityKind,
    custom: Option<Arc<VelocityFn>>,
    autonomous: bool,
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VelocityField")
            .field("kind", &self.kind)
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl VelocityField {
    pub fn new(kind: VelocityKind) -> Self {
        assert!(kind != VelocityKind::Custom, "use VelocityField::custom");
        VelocityField {
            kind,
            custom: None,
            autonomous: true,
        }
    }

    /// A user-supplied field; `autonomous` marks it time-independent, which
    /// lets the solvers reuse backtracked points across steps.
    pub fn custom(f: impl Fn(&AmbientPoint, f64) -> Vector3<f64> + Send + Sync + 'static, autonomous: bool) -> Self {
        VelocityField {
            kind: VelocityKind::Custom,
            custom: Some(Arc::new(f)),
            autonomous,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn is_zero(&self) -> bool {
        self.kind == VelocityKind::Zero
    }

    pub fn eval(&self, surface: &dyn Surface, p: &AmbientPoint, t: f64) -> Result<Vector3<f64>> {
        if let Some(axis) = self.kind.spin_axis() {
            let n = surface.unit_normal(p)?;
            return Ok(SPIN_SPEED * n.cross(&axis));
        }
        Ok(match self.kind {
            VelocityKind::Zero => Vector3::zeros(),
            VelocityKind::CircleRotation => Vector3::new(-p[1], p[0], 0.0),
            VelocityKind::TorusKnot32 => torus_knot(p),
            VelocityKind::Custom => (self.custom.as_ref().expect("custom field"))(p, t),
            _ => unreachable!(),
        })
    }

    /// Surface divergence `div_M v`. Analytic for the built-in fields on
    /// analytic surfaces; central differences along the surface otherwise.
    pub fn divergence(&self, surface: &dyn Surface, p: &AmbientPoint, t: f64) -> Result<f64> {
        match self.kind {
            VelocityKind::Zero | VelocityKind::CircleRotation => Ok(0.0),
            VelocityKind::TorusKnot32 => {
                let (_, alpha) = torus_angles(p);
                Ok(-2.0 * TORUS_TUBE * alpha.sin() / (TORUS_R + TORUS_TUBE * alpha.cos()))
            }
            // N x w is divergence-free on a surface with a smooth normal field
            _ if self.kind.spin_axis().is_some() && surface.level_value(p).is_some() => Ok(0.0),
            _ => numerical_divergence(self, surface, p, t, 1e-4),
        }
    }
}

/// Azimuth and tube angle of a point near the torus.
pub fn torus_angles(p: &AmbientPoint) -> (f64, f64) {
    let rho = p[0].hypot(p[1]);
    (p[1].atan2(p[0]), p[2].atan2(rho - TORUS_R))
}

fn torus_knot(p: &AmbientPoint) -> Vector3<f64> {
    // theta = psi/3, phi = alpha/2 in the torus-knot parameterisation
    let (psi, alpha) = torus_angles(p);
    let rho1 = TORUS_R + TORUS_TUBE * alpha.cos();
    let rho2 = -2.0 * TORUS_TUBE * alpha.sin();
    Vector3::new(
        rho2 * psi.cos() - 3.0 * rho1 * psi.sin(),
        rho2 * psi.sin() + 3.0 * rho1 * psi.cos(),
        2.0 * TORUS_TUBE * alpha.cos(),
    )
}

/// Orthonormal tangent pair at a point with normal `n`.
pub fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let k = n.iamin();
    let t1 = n.cross(&Vector3::ith(k, 1.0)).normalize();
    (t1, n.cross(&t1))
}

fn numerical_divergence(v: &VelocityField, surface: &dyn Surface, p: &AmbientPoint, t: f64, h: f64) -> Result<f64> {
    let n = surface.unit_normal(p)?;
    let (t1, t2) = tangent_basis(&n);
    let dirs: &[Vector3<f64>] = if surface.dim() == 2 {
        &[Vector3::new(-n[1], n[0], 0.0)]
    } else {
        &[t1, t2]
    };
    let mut div = 0.0;
    for e in dirs {
        let qp = surface.closest_point(&(p + h * e))?;
        let qm = surface.closest_point(&(p - h * e))?;
        let dv = v.eval(surface, &qp, t)? - v.eval(surface, &qm, t)?;
        div += e.dot(&dv) / (qp - qm).norm();
    }
    Ok(div)
}
