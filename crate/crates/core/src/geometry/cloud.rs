use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector2, Vector3};

use super::kdtree::KdTree;
use super::{tangent_projector, AmbientPoint, LocalGeometry, NodeSet, Surface};
use crate::error::{Error, Result};

pub const DEFAULT_K_NN: usize = 20;
const DEGENERATE_RATIO: f64 = 0.5;

/// Surface known only through samples with oriented normals.
#[derive(Debug, Clone)]
pub struct PointCloudSurface {
    pub points: Vec<AmbientPoint>,
    pub normals: Vec<Vector3<f64>>,
    pub k_nn: usize,
    tree: KdTree,
    tube_radius: f64,
}

/// Local quadratic height function `w = a u^2 + b uv + c v^2 + d u + e v`
/// over the frame `(e1, e2, n)` anchored at a cloud point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPatch {
    pub origin: AmbientPoint,
    pub frame: Matrix3<f64>,
    pub coeffs: [f64; 5],
}

impl PointCloudSurface {
    /// Builds a cloud; normals are estimated and consistently oriented when
    /// not supplied.
    pub fn new(points: Vec<AmbientPoint>, normals: Option<Vec<Vector3<f64>>>, k_nn: usize) -> Result<Self> {
        if k_nn < 5 {
            return Err(Error::InvalidArgument(format!("k_nn must be at least 5, got {k_nn}")));
        }
        if points.len() < k_nn {
            return Err(Error::InvalidArgument(format!(
                "cloud has {} points, fewer than k_nn = {k_nn}",
                points.len()
            )));
        }
        let tree = KdTree::new(&points);
        let normals = match normals {
            Some(ns) => {
                if ns.len() != points.len() {
                    return Err(Error::InvalidArgument("one normal per point required".into()));
                }
                ns.into_iter().map(|n| n.normalize()).collect()
            }
            None => {
                let raw = pca_normals(&points, &tree, k_nn);
                orient_normals(&points, &tree, k_nn, raw)
            }
        };
        let mut spacing = 0.0;
        for p in &points {
            let nb = tree.nearest(p, 2);
            spacing += (tree.point(nb[1]) - p).norm();
        }
        spacing /= points.len() as f64;
        Ok(PointCloudSurface {
            points,
            normals,
            k_nn,
            tree,
            tube_radius: 2.0 * spacing,
        })
    }

    pub fn from_node_set(set: &NodeSet, k_nn: usize) -> Result<Self> {
        Self::new(set.points.clone(), set.normals.clone(), k_nn)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fits the local height function used for queries near `x`.
    pub fn fit_patch(&self, x: &AmbientPoint) -> Result<CloudPatch> {
        let nb = self.tree.nearest(x, self.k_nn);
        let origin = self.points[nb[0]];
        let (vals, vecs) = covariance_eigen(nb.iter().map(|&i| &self.points[i]));
        let ratio = vals[0] / vals[1].max(f64::MIN_POSITIVE);
        if ratio > DEGENERATE_RATIO {
            return Err(Error::DegeneratePatch { ratio });
        }
        let mut n: Vector3<f64> = vecs.column(0).into();
        if n.dot(&self.normals[nb[0]]) < 0.0 {
            n = -n;
        }
        let e1: Vector3<f64> = vecs.column(2).into();
        let e1 = (e1 - n * n.dot(&e1)).normalize();
        let e2 = n.cross(&e1);
        let frame = Matrix3::from_columns(&[e1, e2, n]);

        let mut a = DMatrix::zeros(nb.len(), 5);
        let mut rhs = DVector::zeros(nb.len());
        for (row, &i) in nb.iter().enumerate() {
            let l = frame.transpose() * (self.points[i] - origin);
            let (u, v) = (l[0], l[1]);
            a.row_mut(row).copy_from_slice(&[u * u, u * v, v * v, u, v]);
            rhs[row] = l[2];
        }
        let sol = a
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|_| Error::DegeneratePatch { ratio })?;
        Ok(CloudPatch {
            origin,
            frame,
            coeffs: [sol[0], sol[1], sol[2], sol[3], sol[4]],
        })
    }
}

impl CloudPatch {
    fn height(&self, u: f64, v: f64) -> (f64, Vector2<f64>) {
        let [a, b, c, d, e] = self.coeffs;
        let h = a * u * u + b * u * v + c * v * v + d * u + e * v;
        let grad = Vector2::new(2.0 * a * u + b * v + d, b * u + 2.0 * c * v + e);
        (h, grad)
    }

    /// Foot point of `x` on the fitted graph, by Newton's method on the
    /// squared distance, started at the orthogonal projection onto the plane.
    pub fn project(&self, x: &AmbientPoint) -> Result<AmbientPoint> {
        let [a, b, c, _, _] = self.coeffs;
        let l = self.frame.transpose() * (x - self.origin);
        let mut uv = Vector2::new(l[0], l[1]);
        for _ in 0..50 {
            let (h, g) = self.height(uv[0], uv[1]);
            let r = h - l[2];
            let grad = Vector2::new(uv[0] - l[0] + r * g[0], uv[1] - l[1] + r * g[1]);
            let hess = nalgebra::Matrix2::new(
                1.0 + g[0] * g[0] + r * 2.0 * a,
                g[0] * g[1] + r * b,
                g[0] * g[1] + r * b,
                1.0 + g[1] * g[1] + r * 2.0 * c,
            );
            let step = hess.lu().solve(&grad).ok_or(Error::NoConvergence {
                iterations: 0,
                point: [x[0], x[1], x[2]],
            })?;
            uv -= step;
            if step.norm() <= 1e-15 * (1.0 + uv.norm()) {
                break;
            }
        }
        let (h, _) = self.height(uv[0], uv[1]);
        Ok(self.origin + self.frame * Vector3::new(uv[0], uv[1], h))
    }

    /// Geometry of the graph `G = w - h(u, v) = 0` at the foot point `p`.
    pub fn geometry(&self, p: &AmbientPoint) -> LocalGeometry {
        let [a, b, c, _, _] = self.coeffs;
        let l = self.frame.transpose() * (p - self.origin);
        let (_, g) = self.height(l[0], l[1]);
        let grad_local = Vector3::new(-g[0], -g[1], 1.0);
        let gn = grad_local.norm();
        let normal = self.frame * grad_local / gn;
        let hess_local = Matrix3::new(-2.0 * a, -b, 0.0, -b, -2.0 * c, 0.0, 0.0, 0.0, 0.0);
        let hess = self.frame * hess_local * self.frame.transpose();
        let proj = tangent_projector(&normal);
        LocalGeometry {
            normal,
            mean_curvature: (hess.trace() - normal.dot(&(hess * normal))) / gn,
            shape: proj * hess * proj / gn,
        }
    }
}

/// Closest point and geometry of a point cloud near `x`.
pub fn estimate_cloud_geometry(cloud: &PointCloudSurface, x: &AmbientPoint) -> Result<(AmbientPoint, LocalGeometry)> {
    let patch = cloud.fit_patch(x)?;
    let p = patch.project(x)?;
    Ok((p, patch.geometry(&p)))
}

impl Surface for PointCloudSurface {
    fn dim(&self) -> usize {
        3
    }

    fn name(&self) -> String {
        format!("cloud({} points)", self.points.len())
    }

    fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    fn closest_point(&self, x: &AmbientPoint) -> Result<AmbientPoint> {
        Ok(estimate_cloud_geometry(self, x)?.0)
    }

    fn local_geometry(&self, p: &AmbientPoint) -> Result<LocalGeometry> {
        let patch = self.fit_patch(p)?;
        Ok(patch.geometry(&patch.project(p)?))
    }
}

/// Eigenvalues (ascending) and eigenvectors of the neighbourhood covariance.
fn covariance_eigen<'a>(pts: impl Iterator<Item = &'a AmbientPoint> + Clone) -> (Vector3<f64>, Matrix3<f64>) {
    let count = pts.clone().count() as f64;
    let mean = pts.clone().fold(Vector3::zeros(), |acc, p| acc + p) / count;
    let cov = pts.fold(Matrix3::zeros(), |acc, p| {
        let d = p - mean;
        acc + d * d.transpose()
    }) / count;
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = Vector3::new(eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]);
    let vecs = Matrix3::from_columns(&[
        eig.eigenvectors.column(idx[0]).into_owned(),
        eig.eigenvectors.column(idx[1]).into_owned(),
        eig.eigenvectors.column(idx[2]).into_owned(),
    ]);
    (vals, vecs)
}

fn pca_normals(points: &[AmbientPoint], tree: &KdTree, k: usize) -> Vec<Vector3<f64>> {
    points
        .iter()
        .map(|p| {
            let nb = tree.nearest(p, k);
            let (_, vecs) = covariance_eigen(nb.iter().map(|&i| &points[i]));
            vecs.column(0).into_owned()
        })
        .collect()
}

#[derive(PartialEq)]
struct Edge(f64, usize, usize);

impl Eq for Edge {}

impl PartialOrd for Edge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Edge {
    // min-heap on weight
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.2.cmp(&self.2))
    }
}

/// Propagates a consistent orientation along a minimum spanning tree of the
/// kNN graph weighted by `1 - |n_i . n_j|`. Each component is seeded at its
/// highest point, oriented away from the cloud centroid.
fn orient_normals(points: &[AmbientPoint], tree: &KdTree, k: usize, mut normals: Vec<Vector3<f64>>) -> Vec<Vector3<f64>> {
    let n = points.len();
    let centroid = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n as f64;
    let neighbours: Vec<Vec<usize>> = points.iter().map(|p| tree.nearest(p, k)).collect();
    let mut done = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[b][2].total_cmp(&points[a][2]).then(a.cmp(&b)));
    for &seed in &order {
        if done[seed] {
            continue;
        }
        let out = points[seed] - centroid;
        if normals[seed].dot(&out) < 0.0 {
            normals[seed] = -normals[seed];
        }
        done[seed] = true;
        let mut heap = BinaryHeap::new();
        let push = |heap: &mut BinaryHeap<Edge>, normals: &[Vector3<f64>], done: &[bool], i: usize| {
            for &j in &neighbours[i] {
                if !done[j] {
                    heap.push(Edge(1.0 - normals[i].dot(&normals[j]).abs(), i, j));
                }
            }
        };
        push(&mut heap, &normals, &done, seed);
        while let Some(Edge(_, from, to)) = heap.pop() {
            if done[to] {
                continue;
            }
            if normals[from].dot(&normals[to]) < 0.0 {
                normals[to] = -normals[to];
            }
            done[to] = true;
            push(&mut heap, &normals, &done, to);
        }
    }
    normals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_nodes, ImplicitSurface, SurfaceKind};
    use approx::assert_relative_eq;

    fn sphere_cloud(n: usize) -> PointCloudSurface {
        let s = ImplicitSurface::new(SurfaceKind::Sphere);
        let set = generate_nodes(&s, n).unwrap();
        PointCloudSurface::new(set.points, None, DEFAULT_K_NN).unwrap()
    }

    #[test]
    fn sphere_cloud_projection() {
        let cloud = sphere_cloud(2000);
        let h = (4.0 * std::f64::consts::PI / 2000.0).sqrt();
        let (p, g) = estimate_cloud_geometry(&cloud, &Vector3::new(0.0, 0.0, 1.05)).unwrap();
        assert!((p - Vector3::z()).norm() < 2.0 * h);
        assert!(g.normal.dot(&Vector3::z()) > 5f64.to_radians().cos());
        assert_relative_eq!(g.normal.norm(), 1.0, epsilon = 1e-14);
        assert!((g.mean_curvature - 2.0).abs() < 0.2, "{}", g.mean_curvature);
    }

    #[test]
    fn orientation_is_outward_and_consistent() {
        let cloud = sphere_cloud(800);
        for (p, n) in cloud.points.iter().zip(&cloud.normals) {
            assert!(n.dot(p) > 0.9);
        }
    }

    #[test]
    fn planar_patch_projects_orthogonally() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        let normals = vec![Vector3::z(); pts.len()];
        let cloud = PointCloudSurface::new(pts, Some(normals), DEFAULT_K_NN).unwrap();
        let x = Vector3::new(0.43, 0.52, 0.07);
        let (p, g) = estimate_cloud_geometry(&cloud, &x).unwrap();
        assert_relative_eq!(p, Vector3::new(0.43, 0.52, 0.0), epsilon = 1e-12);
        assert_relative_eq!(g.normal, Vector3::z(), epsilon = 1e-12);
        assert_relative_eq!(g.mean_curvature, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn cloud_point_is_fixed() {
        let cloud = sphere_cloud(500);
        let q = cloud.points[123];
        let (p, _) = estimate_cloud_geometry(&cloud, &q).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn isotropic_blob_is_degenerate() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    pts.push(Vector3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let normals = vec![Vector3::z(); pts.len()];
        let cloud = PointCloudSurface::new(pts, Some(normals), 27).unwrap();
        assert!(matches!(
            estimate_cloud_geometry(&cloud, &Vector3::new(1.5, 1.5, 1.5)),
            Err(Error::DegeneratePatch { .. })
        ));
    }
}
