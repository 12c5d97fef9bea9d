use nalgebra::{Matrix3, Vector3};

use super::bessel::{gamma_half_integer, scaled_bessel_k, scaled_bessel_k_at_zero};
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, LocalGeometry, Surface};

/// Whittle-Matérn kernel of smoothness order `m` in ambient dimension `d`,
/// `phi(r) = c (r/l)^nu K_nu(r/l)` with `nu = m - d/2`, normalised so that
/// `phi(0) = 1/nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub m: u32,
    pub d: usize,
    /// Length scale `l`; 1 is the unit-scale kernel.
    pub scale: f64,
}

/// Radial profile and derivatives at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
    /// `phi'(r) / r`, with its limit at `r = 0`.
    pub dphi_over_r: f64,
}

/// Kernel value with ambient gradient and Hessian in the first argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDerivatives {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

impl KernelSpec {
    pub fn new(m: u32, d: usize) -> Result<Self> {
        Self::with_scale(m, d, 1.0)
    }

    pub fn with_scale(m: u32, d: usize, scale: f64) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(Error::InvalidArgument(format!("ambient dimension must be 2 or 3, got {d}")));
        }
        if m < 2 {
            return Err(Error::InvalidArgument(format!("kernel order m must be at least 2, got {m}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel scale must be positive, got {scale}")));
        }
        Ok(KernelSpec { m, d, scale })
    }

    pub fn nu(&self) -> f64 {
        self.m as f64 - self.d as f64 / 2.0
    }

    /// Normalising constant `2^(1-nu) / Gamma(nu + 1)`.
    pub fn constant(&self) -> f64 {
        let nu = self.nu();
        2f64.powf(1.0 - nu) / gamma_half_integer(nu + 1.0)
    }

    /// Whether the kernel is twice differentiable at the origin.
    pub fn smooth_at_origin(&self) -> bool {
        self.nu() > 1.0
    }

    /// `phi` and its first two radial derivatives.
    pub fn radial(&self, r: f64) -> Result<Radial> {
        self.radial_impl(r, true)
    }

    /// `phi` alone.
    pub fn value(&self, r: f64) -> f64 {
        let nu = self.nu();
        let s = r / self.scale;
        if s == 0.0 {
            1.0 / nu
        } else {
            self.constant() * scaled_bessel_k(nu, s)
        }
    }

    fn radial_impl(&self, r: f64, second: bool) -> Result<Radial> {
        debug_assert!(r >= 0.0);
        let nu = self.nu();
        let c = self.constant();
        let l = self.scale;
        let s = r / l;
        if s == 0.0 {
            let dphi = if nu > 0.5 {
                0.0
            } else {
                -c * scaled_bessel_k_at_zero(0.5) / l
            };
            let curv = if nu > 1.0 {
                -c * scaled_bessel_k_at_zero(nu - 1.0) / (l * l)
            } else if second {
                return Err(Error::UnsupportedOrder {
                    nu,
                    what: "second derivatives at r = 0",
                });
            } else {
                f64::NAN
            };
            return Ok(Radial {
                phi: 1.0 / nu,
                dphi,
                d2phi: curv,
                dphi_over_r: curv,
            });
        }
        let g0 = scaled_bessel_k(nu, s);
        let g1 = scaled_bessel_k(nu - 1.0, s);
        Ok(Radial {
            phi: c * g0,
            dphi: -c * s * g1 / l,
            // r^2 g_{nu-2} = g_nu - 2(nu - 1) g_{nu-1}
            d2phi: c * (g0 - (2.0 * nu - 1.0) * g1) / (l * l),
            dphi_over_r: -c * g1 / (l * l),
        })
    }

    /// Value, gradient and Hessian of `p -> phi(|p - z|)`.
    pub fn derivatives(&self, p: &AmbientPoint, z: &AmbientPoint) -> Result<KernelDerivatives> {
        let diff = p - z;
        let r = diff.norm();
        let rad = self.radial(r)?;
        if r == 0.0 {
            return Ok(KernelDerivatives {
                value: rad.phi,
                gradient: Vector3::zeros(),
                hessian: Matrix3::identity() * rad.d2phi,
            });
        }
        let u = diff / r;
        let uu = u * u.transpose();
        Ok(KernelDerivatives {
            value: rad.phi,
            gradient: u * rad.dphi,
            hessian: uu * rad.d2phi + (Matrix3::identity() - uu) * rad.dphi_over_r,
        })
    }

    /// Surface Laplacian of `p -> phi(|p - z|)` at a surface point, from the
    /// ambient derivatives: `tr H - n^T H n - kappa n . grad`.
    pub fn surface_laplacian_at(&self, p: &AmbientPoint, z: &AmbientPoint, geom: &LocalGeometry) -> Result<f64> {
        let diff = p - z;
        let r = diff.norm();
        let rad = self.radial(r)?;
        let d = self.d as f64;
        if r == 0.0 {
            return Ok((d - 1.0) * rad.d2phi);
        }
        let un = geom.normal.dot(&diff) / r;
        let un2 = un * un;
        let ambient = rad.d2phi + (d - 1.0) * rad.dphi_over_r;
        let normal_part = rad.d2phi * un2 + rad.dphi_over_r * (1.0 - un2);
        Ok(ambient - normal_part - geom.mean_curvature * rad.dphi * un)
    }

    /// Tangential gradient `P grad` of `p -> phi(|p - z|)`.
    pub fn surface_gradient_at(&self, p: &AmbientPoint, z: &AmbientPoint, normal: &Vector3<f64>) -> Result<Vector3<f64>> {
        let diff = p - z;
        let r = diff.norm();
        if r == 0.0 {
            return Ok(Vector3::zeros());
        }
        let rad = self.radial_impl(r, false)?;
        let g = diff * rad.dphi_over_r;
        Ok(g - normal * normal.dot(&g))
    }
}

/// `(phi, phi', phi'')` at distance `r`.
pub fn matern_radial(spec: &KernelSpec, r: f64) -> Result<(f64, f64, f64)> {
    let rad = spec.radial(r)?;
    Ok((rad.phi, rad.dphi, rad.d2phi))
}

pub fn ambient_derivatives(spec: &KernelSpec, p: &AmbientPoint, z: &AmbientPoint) -> Result<KernelDerivatives> {
    spec.derivatives(p, z)
}

/// Surface Laplacian of the kernel centred at `z`, evaluated at `p`.
pub fn surface_laplacian_kernel(surface: &dyn Surface, spec: &KernelSpec, p: &AmbientPoint, z: &AmbientPoint) -> Result<f64> {
    let geom = surface.local_geometry(p)?;
    spec.surface_laplacian_at(p, z, &geom)
}
