use nalgebra::{DMatrix, DVector, Vector3, LU};
use rayon::prelude::*;

use super::matern::KernelSpec;
use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, LocalGeometry, Surface};

/// Relative pivot threshold below which a factorization is rejected.
pub const PIVOT_TOL: f64 = 1e-14;

/// Fills an `rows x cols` matrix row by row in parallel. Output does not
/// depend on the thread count.
pub(crate) fn par_matrix<F>(rows: usize, cols: usize, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let mut buf = vec![0.0; rows * cols];
    if cols > 0 {
        buf.par_chunks_mut(cols)
            .enumerate()
            .try_for_each(|(i, row)| f(i, row))?;
    }
    Ok(DMatrix::from_row_slice(rows, cols, &buf))
}

fn check_dim(spec: &KernelSpec, surface: &dyn Surface) -> Result<()> {
    if spec.d != surface.dim() {
        return Err(Error::InvalidArgument(format!(
            "kernel built for d = {} but surface {} has d = {}",
            spec.d,
            surface.name(),
            surface.dim()
        )));
    }
    Ok(())
}

/// `Phi(X, Z)`.
pub fn kernel_matrix(spec: &KernelSpec, x: &[AmbientPoint], z: &[AmbientPoint]) -> DMatrix<f64> {
    par_matrix(x.len(), z.len(), |i, row| {
        for (j, zj) in z.iter().enumerate() {
            row[j] = spec.value((x[i] - zj).norm());
        }
        Ok(())
    })
    .expect("kernel values are infallible")
}

/// Local geometry at every point of `x`, in parallel.
pub fn local_geometries(surface: &dyn Surface, x: &[AmbientPoint]) -> Result<Vec<LocalGeometry>> {
    x.par_iter().map(|p| surface.local_geometry(p)).collect()
}

/// `Delta_M Phi(X, Z)` given the geometry at each point of `x`.
pub fn laplacian_matrix_with(
    spec: &KernelSpec,
    x: &[AmbientPoint],
    geoms: &[LocalGeometry],
    z: &[AmbientPoint],
) -> Result<DMatrix<f64>> {
    par_matrix(x.len(), z.len(), |i, row| {
        for (j, zj) in z.iter().enumerate() {
            row[j] = spec.surface_laplacian_at(&x[i], zj, &geoms[i])?;
        }
        Ok(())
    })
}

/// `Delta_M Phi(X, Z)`.
pub fn laplacian_matrix(spec: &KernelSpec, surface: &dyn Surface, x: &[AmbientPoint], z: &[AmbientPoint]) -> Result<DMatrix<f64>> {
    check_dim(spec, surface)?;
    let geoms = local_geometries(surface, x)?;
    laplacian_matrix_with(spec, x, &geoms, z)
}

/// `V_ij = v_i . grad_M Phi(x_i, z_j)` for the given velocities at `x`.
pub fn advection_matrix(
    spec: &KernelSpec,
    surface: &dyn Surface,
    x: &[AmbientPoint],
    velocities: &[Vector3<f64>],
    z: &[AmbientPoint],
) -> Result<DMatrix<f64>> {
    check_dim(spec, surface)?;
    let geoms = local_geometries(surface, x)?;
    par_matrix(x.len(), z.len(), |i, row| {
        for (j, zj) in z.iter().enumerate() {
            row[j] = velocities[i].dot(&spec.surface_gradient_at(&x[i], zj, &geoms[i].normal)?);
        }
        Ok(())
    })
}

/// Kernel and Laplacian matrices between collocation points and centers.
#[derive(Debug, Clone)]
pub struct CollocationSystem {
    pub spec: KernelSpec,
    pub centers: Vec<AmbientPoint>,
    pub points: Vec<AmbientPoint>,
    pub phi: DMatrix<f64>,
    pub lap_phi: DMatrix<f64>,
}

pub fn assemble(spec: &KernelSpec, surface: &dyn Surface, points: &[AmbientPoint], centers: &[AmbientPoint]) -> Result<CollocationSystem> {
    check_dim(spec, surface)?;
    Ok(CollocationSystem {
        spec: *spec,
        centers: centers.to_vec(),
        points: points.to_vec(),
        phi: kernel_matrix(spec, points, centers),
        lap_phi: laplacian_matrix(spec, surface, points, centers)?,
    })
}

/// LU factorization with partial pivoting, rejected when a pivot falls below
/// `PIVOT_TOL` times the largest matrix entry.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Factorization {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!("cannot factor a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let scale = a.amax();
        let lu = a.lu();
        let u = lu.u();
        let pivot = u.diagonal().amin();
        if !(pivot >= PIVOT_TOL * scale) || !scale.is_finite() {
            return Err(Error::SingularSystem { pivot, scale });
        }
        Ok(Factorization { lu })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("factorization checked non-singular")
    }

    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }
}

/// Interpolation coefficients `lambda` with `Phi(P, Z) lambda = values`.
pub fn fit_coefficients(system: &CollocationSystem, values: &DVector<f64>) -> Result<DVector<f64>> {
    if values.len() != system.points.len() {
        return Err(Error::InvalidArgument(format!(
            "{} values for {} collocation points",
            values.len(),
            system.points.len()
        )));
    }
    Ok(Factorization::new(system.phi.clone())?.solve(values))
}

/// `Phi(Q, Z) lambda`.
pub fn evaluate(spec: &KernelSpec, centers: &[AmbientPoint], lambda: &DVector<f64>, queries: &[AmbientPoint]) -> DVector<f64> {
    assert_eq!(lambda.len(), centers.len(), "one coefficient per center");
    let vals: Vec<f64> = queries
        .par_iter()
        .map(|q| {
            centers
                .iter()
                .zip(lambda.iter())
                .map(|(z, l)| spec.value((q - z).norm()) * l)
                .sum()
        })
        .collect();
    DVector::from_vec(vals)
}

/// `Delta_M Phi(Q, Z) lambda`.
pub fn evaluate_laplacian(
    spec: &KernelSpec,
    surface: &dyn Surface,
    centers: &[AmbientPoint],
    lambda: &DVector<f64>,
    queries: &[AmbientPoint],
) -> Result<DVector<f64>> {
    assert_eq!(lambda.len(), centers.len(), "one coefficient per center");
    check_dim(spec, surface)?;
    let vals = queries
        .par_iter()
        .map(|q| {
            let g = surface.local_geometry(q)?;
            let mut s = 0.0;
            for (z, l) in centers.iter().zip(lambda.iter()) {
                s += spec.surface_laplacian_at(q, z, &g)? * l;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(vals))
}
