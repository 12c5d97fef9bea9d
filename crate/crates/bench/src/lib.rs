//! Shared fixtures for the benchmarks.

use nalgebra::DVector;
use tbrbf::geometry::generate_nodes;
use tbrbf::{AmbientPoint, ImplicitSurface, SurfaceKind};

pub fn nodes(kind: SurfaceKind, n: usize) -> (ImplicitSurface, Vec<AmbientPoint>) {
    let s = ImplicitSurface::new(kind);
    let pts = generate_nodes(&s, n).expect("node generation").points;
    (s, pts)
}

/// `cos(theta)` on circle nodes, `z` elsewhere.
pub fn smooth_data(nodes: &[AmbientPoint]) -> DVector<f64> {
    DVector::from_iterator(nodes.len(), nodes.iter().map(|p| if p[2] == 0.0 { p[0] } else { p[2] }))
}
