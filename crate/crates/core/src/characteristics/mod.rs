//! Velocity fields and surface-restricted explicit Runge-Kutta backtracking
//! of characteristic curves.

mod velocity;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, Surface};

pub use velocity::{tangent_basis, torus_angles, VelocityField, VelocityFn, VelocityKind, SPIN_SPEED};

/// Explicit Runge-Kutta coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub stages: usize,
    /// Strictly lower triangular; `a[i][j]` for `j < i`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
}

/// Forward Euler, explicit midpoint or Kutta's third-order method.
pub fn tableau(stages: usize) -> Result<ButcherTableau> {
    let t = match stages {
        1 => ButcherTableau {
            stages,
            a: vec![vec![]],
            b: vec![1.0],
            c: vec![0.0],
            order: 1,
        },
        2 => ButcherTableau {
            stages,
            a: vec![vec![], vec![0.5]],
            b: vec![0.0, 1.0],
            c: vec![0.0, 0.5],
            order: 2,
        },
        3 => ButcherTableau {
            stages,
            a: vec![vec![], vec![0.5], vec![-1.0, 2.0]],
            b: vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 1.0],
            order: 3,
        },
        s => return Err(Error::UnsupportedStage(s)),
    };
    Ok(t)
}

/// Foot of the characteristic through `p` at `t_end`, traced back by `dt`.
/// Every stage point is projected onto the surface.
pub fn backtrack_point(
    surface: &dyn Surface,
    v: &VelocityField,
    p: &AmbientPoint,
    t_end: f64,
    dt: f64,
    tab: &ButcherTableau,
) -> Result<AmbientPoint> {
    let mut k: Vec<Vector3<f64>> = Vec::with_capacity(tab.stages);
    for i in 0..tab.stages {
        let disp = tab.a[i]
            .iter()
            .zip(&k)
            .fold(Vector3::zeros(), |acc, (a, kj)| acc + kj * *a);
        let x = if disp == Vector3::zeros() {
            *p
        } else {
            surface.closest_point(&(p - dt * disp))?
        };
        k.push(v.eval(surface, &x, t_end - tab.c[i] * dt)?);
    }
    let disp = tab.b.iter().zip(&k).fold(Vector3::zeros(), |acc, (b, kj)| acc + kj * *b);
    if disp == Vector3::zeros() {
        Ok(*p)
    } else {
        surface.closest_point(&(p - dt * disp))
    }
}

/// Backtracks all points over `dt`, split into `substeps` equal pieces.
pub fn backtrack_substeps(
    surface: &dyn Surface,
    v: &VelocityField,
    points: &[AmbientPoint],
    t_end: f64,
    dt: f64,
    tab: &ButcherTableau,
    substeps: usize,
) -> Result<Vec<AmbientPoint>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let substeps = substeps.max(1);
    let h = dt / substeps as f64;
    points
        .par_iter()
        .map(|p| {
            let mut x = *p;
            for k in 0..substeps {
                x = backtrack_point(surface, v, &x, t_end - k as f64 * h, h, tab)?;
            }
            Ok(x)
        })
        .collect()
}

/// `X(t_end - dt; P, t_end)` with one Runge-Kutta step per point.
pub fn backtrack(
    surface: &dyn Surface,
    v: &VelocityField,
    points: &[AmbientPoint],
    t_end: f64,
    dt: f64,
    tab: &ButcherTableau,
) -> Result<Vec<AmbientPoint>> {
    backtrack_substeps(surface, v, points, t_end, dt, tab, 1)
}
