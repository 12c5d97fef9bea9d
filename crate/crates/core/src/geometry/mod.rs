//! Surfaces, closest-point projection, normals, curvature and node sets.
//!
//! Points are always stored as `Vector3<f64>`; planar curves (the circle) live
//! in the `z = 0` plane and report `dim() == 2`.

mod cloud;
mod implicit;
mod kdtree;
mod nodes;

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;

pub use cloud::{estimate_cloud_geometry, CloudPatch, PointCloudSurface, DEFAULT_K_NN};
pub use implicit::{ImplicitSurface, LevelSet, SurfaceKind, TORUS_R, TORUS_TUBE};
pub use kdtree::KdTree;
pub use nodes::{fill_distance, generate_nodes, load_nodes, NodeSet};

pub type AmbientPoint = Vector3<f64>;

/// Normal and curvature data at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGeometry {
    pub normal: Vector3<f64>,
    /// Sum of principal curvatures w.r.t. the outward normal.
    pub mean_curvature: f64,
    /// Differential of the unit normal field, `dN = S dp` for tangent `dp`.
    /// Symmetric and annihilates the normal.
    pub shape: Matrix3<f64>,
}

/// Anything the solvers can run on.
pub trait Surface: Send + Sync {
    /// Ambient dimension, 2 or 3.
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    /// Half-width of the narrow band around the surface.
    fn tube_radius(&self) -> f64;

    fn closest_point(&self, x: &AmbientPoint) -> Result<AmbientPoint>;

    /// Normal, mean curvature and shape operator at a surface point.
    fn local_geometry(&self, p: &AmbientPoint) -> Result<LocalGeometry>;

    fn unit_normal(&self, p: &AmbientPoint) -> Result<Vector3<f64>> {
        Ok(self.local_geometry(p)?.normal)
    }

    fn mean_curvature(&self, p: &AmbientPoint) -> Result<f64> {
        Ok(self.local_geometry(p)?.mean_curvature)
    }

    /// Signed distance, positive on the side the normal points to.
    fn signed_distance(&self, x: &AmbientPoint) -> Result<f64> {
        let p = self.closest_point(x)?;
        let n = self.unit_normal(&p)?;
        let d = x - p;
        Ok(d.norm().copysign(n.dot(&d)))
    }

    /// Residual of the surface equation, when one exists (`None` for clouds).
    fn level_value(&self, _x: &AmbientPoint) -> Option<f64> {
        None
    }
}

/// Tangential projector `I - n n^T`.
pub fn tangent_projector(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - n * n.transpose()
}
