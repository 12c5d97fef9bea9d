use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;

use super::implicit::{TORUS_R, TORUS_TUBE};
use super::kdtree::KdTree;
use super::{AmbientPoint, ImplicitSurface, Surface, SurfaceKind};
use crate::error::{Error, Result};

/// Trial centers / collocation points on a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub points: Vec<AmbientPoint>,
    /// Nominal spacing (2π/n on the circle).
    pub spacing: f64,
    pub dim: usize,
    /// Oriented normals read from a node file, if present.
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl NodeSet {
    /// Builds a node set, rejecting exact duplicates.
    pub fn new(points: Vec<AmbientPoint>, spacing: f64, dim: usize) -> Result<Self> {
        if let Some(i) = first_duplicate(&points) {
            return Err(Error::InvalidArgument(format!("node {i} duplicates an earlier node")));
        }
        Ok(NodeSet {
            points,
            spacing,
            dim,
            normals: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest |F| over the nodes, for surfaces with an equation.
    pub fn max_level_residual(&self, surface: &dyn Surface) -> Option<f64> {
        self.points
            .iter()
            .map(|p| surface.level_value(p).map(f64::abs))
            .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
    }

    /// Distance from each node to its nearest other node.
    pub fn nearest_gaps(&self) -> Vec<f64> {
        let tree = KdTree::new(&self.points);
        self.points
            .iter()
            .map(|p| {
                tree.nearest(p, 2)
                    .get(1)
                    .map_or(f64::INFINITY, |&j| (tree.point(j) - p).norm())
            })
            .collect()
    }
}

fn first_duplicate(points: &[AmbientPoint]) -> Option<usize> {
    let mut seen = HashSet::with_capacity(points.len());
    points
        .iter()
        .position(|p| !seen.insert([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]))
}

/// Built-in samplers for the circle, sphere and torus.
pub fn generate_nodes(surface: &ImplicitSurface, n: usize) -> Result<NodeSet> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 nodes, got {n}")));
    }
    match surface.kind {
        SurfaceKind::Circle => {
            let points = (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    Vector3::new(th.cos(), th.sin(), 0.0)
                })
                .collect();
            NodeSet::new(points, 2.0 * PI / n as f64, 2)
        }
        SurfaceKind::Sphere => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let points = (0..n)
                .map(|k| {
                    let z = 1.0 - (2 * k + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    surface.closest_point(&Vector3::new(r * th.cos(), r * th.sin(), z))
                })
                .collect::<Result<Vec<_>>>()?;
            NodeSet::new(points, (4.0 * PI / n as f64).sqrt(), 3)
        }
        SurfaceKind::Torus => {
            // rings of constant tube angle; ring sizes follow the ring circumference
            let rings = ((n as f64 * TORUS_TUBE / TORUS_R).sqrt().round() as usize).max(2);
            let per = n as f64 / rings as f64;
            let mut points = Vec::with_capacity(n);
            for k in 0..rings {
                let ph = 2.0 * PI * k as f64 / rings as f64;
                let rho = TORUS_R + TORUS_TUBE * ph.cos();
                let count = ((per * rho / TORUS_R).round() as usize).max(3);
                let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
                for j in 0..count {
                    let th = 2.0 * PI * (j as f64 + shift) / count as f64;
                    let x = Vector3::new(rho * th.cos(), rho * th.sin(), TORUS_TUBE * ph.sin());
                    points.push(surface.closest_point(&x)?);
                }
            }
            let area = 4.0 * PI * PI * TORUS_R * TORUS_TUBE;
            let h = (area / points.len() as f64).sqrt();
            NodeSet::new(points, h, 3)
        }
        other => Err(Error::UnsupportedSurface(other.to_string())),
    }
}

/// Reads a node file: one point per line, 2 or 3 coordinates, optionally
/// followed by 3 normal components; `#` starts a comment line.
pub fn load_nodes(path: impl AsRef<Path>) -> Result<NodeSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let bad = |line: usize, message: String| Error::FileFormat {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut dim = None;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let vals = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(line, format!("`{t}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad(line, "non-finite coordinate".into()));
        }
        let (d, has_normal) = match vals.len() {
            2 => (2, false),
            3 => (3, false),
            5 => (2, true),
            6 => (3, true),
            c => return Err(bad(line, format!("expected 2, 3, 5 or 6 columns, found {c}"))),
        };
        match dim {
            None => dim = Some((d, has_normal)),
            Some(prev) if prev != (d, has_normal) => {
                return Err(bad(line, "column count differs from earlier lines".into()))
            }
            _ => {}
        }
        let p = if d == 2 {
            Vector3::new(vals[0], vals[1], 0.0)
        } else {
            Vector3::new(vals[0], vals[1], vals[2])
        };
        if !seen.insert([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]) {
            return Err(bad(line, "duplicate point".into()));
        }
        points.push(p);
        if has_normal {
            let n = Vector3::new(vals[d], vals[d + 1], vals[d + 2]);
            let len = n.norm();
            if len == 0.0 {
                return Err(bad(line, "zero normal".into()));
            }
            normals.push(n / len);
        }
    }
    let Some((dim, has_normal)) = dim else {
        return Err(bad(0, "no points".into()));
    };
    let mut set = NodeSet {
        spacing: 0.0,
        dim,
        normals: has_normal.then_some(normals),
        points,
    };
    let gaps = set.nearest_gaps();
    set.spacing = if gaps.iter().all(|g| g.is_finite()) {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    } else {
        0.0
    };
    Ok(set)
}

/// Sup over `samples` of the distance to the nearest node.
pub fn fill_distance(nodes: &NodeSet, samples: &[AmbientPoint]) -> f64 {
    let tree = KdTree::new(&nodes.points);
    samples
        .iter()
        .map(|s| tree.nearest(s, 1).first().map_or(f64::INFINITY, |&i| (tree.point(i) - s).norm()))
        .fold(0.0, f64::max)
}
