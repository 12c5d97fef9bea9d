//! Trajectory-based RBF collocation for advection-diffusion equations on
//! closed surfaces.
//!
//! The pieces, bottom up:
//!
//! * [`geometry`]: analytic level-set surfaces and point clouds, closest points,
//!   normals, curvature, node sets.
//! * [`kernels`]: Whittle-Matérn kernels, the surface Laplacian of the kernel,
//!   collocation matrices and interpolation.
//! * [`characteristics`]: velocity fields and surface-restricted Runge-Kutta
//!   backtracking.
//! * [`pushforward`]: band extensions of velocity and diffusion tensor, with
//!   numerical identity checks.
//! * [`solver`]: semi-Lagrangian CN/BDF steppers, an Eulerian Kansa baseline
//!   and a two-species Turing system.
//! * [`harness`]: configuration, experiment drivers and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod characteristics;
pub mod pushforward;
pub mod solver;
pub mod harness;

pub use error::{Error, Result};
pub use kernels::{CollocationSystem, KernelSpec};
pub use geometry::{AmbientPoint, ImplicitSurface, NodeSet, PointCloudSurface, Surface, SurfaceKind};
