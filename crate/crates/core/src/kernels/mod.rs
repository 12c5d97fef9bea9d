//! Whittle-Matérn kernels and RBF collocation on surfaces.

pub mod bessel;
mod collocation;
mod matern;

pub use collocation::{
    advection_matrix, assemble, evaluate, evaluate_laplacian, fit_coefficients, kernel_matrix, laplacian_matrix,
    laplacian_matrix_with, local_geometries, CollocationSystem, Factorization, PIVOT_TOL,
};
pub use matern::{ambient_derivatives, matern_radial, surface_laplacian_kernel, KernelDerivatives, KernelSpec, Radial};
