use nalgebra::Vector3;

/// Static 3-d tree over a point slice, for k-nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    // permutation of point indices; node i covers perm[lo..hi] with the split at mid
    perm: Vec<usize>,
}

const LEAF: usize = 8;

impl KdTree {
    pub fn new(points: &[Vector3<f64>]) -> Self {
        let mut perm: Vec<usize> = (0..points.len()).collect();
        build(points, &mut perm, 0);
        KdTree {
            points: points.to_vec(),
            perm,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Vector3<f64> {
        &self.points[i]
    }

    /// Indices of the `k` nearest points, closest first. Ties break on index.
    pub fn nearest(&self, q: &Vector3<f64>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.search(q, k, 0, self.perm.len(), 0, &mut best);
        best.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, q: &Vector3<f64>, k: usize, lo: usize, hi: usize, depth: usize, best: &mut Vec<(f64, usize)>) {
        if hi - lo <= LEAF {
            for &i in &self.perm[lo..hi] {
                let d = (self.points[i] - q).norm_squared();
                insert(best, k, (d, i));
            }
            return;
        }
        let axis = depth % 3;
        let mid = lo + (hi - lo) / 2;
        let pivot = self.perm[mid];
        let diff = q[axis] - self.points[pivot][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        insert(best, k, ((self.points[pivot] - q).norm_squared(), pivot));
        self.search(q, k, near.0, near.1, depth + 1, best);
        if best.len() < k || diff * diff <= best[best.len() - 1].0 {
            self.search(q, k, far.0, far.1, depth + 1, best);
        }
    }
}

fn insert(best: &mut Vec<(f64, usize)>, k: usize, item: (f64, usize)) {
    let key = |a: &(f64, usize)| (a.0, a.1);
    if best.len() == k {
        let last = best[k - 1];
        if key(&item) >= key(&last) {
            return;
        }
        best.pop();
    }
    let pos = best.partition_point(|b| key(b) < key(&item));
    best.insert(pos, item);
}

fn build(points: &[Vector3<f64>], perm: &mut [usize], depth: usize) {
    if perm.len() <= LEAF {
        return;
    }
    let axis = depth % 3;
    let mid = perm.len() / 2;
    perm.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let (left, right) = perm.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}
