//! Static 3-d tree with exact nearest, k-nearest and radius queries.
//!
//! Ties on distance always resolve to the lowest point index, so every query
//! agrees with a linear scan that keeps the first minimum it sees.

use crate::error::{Error, Result};
use crate::scalar::{cmp_real, Real};

use super::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node<T> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: T,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
pub struct KdTree<T: Real = f64> {
    points: Vec<Point3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[Point3<T>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        tree.build_node(0, points.len());
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            cmp_real(pts[a][axis], pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[start + mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let first = self.points[self.order[start]];
        let (mut lo, mut hi) = (first, first);
        for &i in &self.order[start + 1..end] {
            let p = self.points[i];
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let ext = hi - lo;
        let mut axis = 0;
        for k in 1..3 {
            if ext[k] > ext[axis] {
                axis = k;
            }
        }
        axis
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    /// Index of the closest point and its Euclidean distance.
    pub fn nearest(&self, q: &Point3<T>) -> (usize, T) {
        let (i, d2) = self.nearest_sq(q);
        (i, d2.sqrt())
    }

    /// Index of the closest point and the squared distance.
    pub fn nearest_sq(&self, q: &Point3<T>) -> (usize, T) {
        let mut best = (usize::MAX, T::max_value().unwrap_or_else(T::one));
        self.nearest_rec(0, q, &mut best);
        best
    }

    fn nearest_rec(&self, node: usize, q: &Point3<T>, best: &mut (usize, T)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points ordered by (distance, index). Distances are Euclidean.
    pub fn knn(&self, q: &Point3<T>, k: usize) -> Vec<(usize, T)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        self.knn_rec(0, q, k, &mut heap);
        heap.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn knn_rec(&self, node: usize, q: &Point3<T>, k: usize, found: &mut Vec<(T, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    let worse_than_all = found.len() == k && {
                        let (wd, wi) = found[k - 1];
                        d2 > wd || (d2 == wd && i > wi)
                    };
                    if worse_than_all {
                        continue;
                    }
                    let pos = found.partition_point(|&(fd, fi)| fd < d2 || (fd == d2 && fi < i));
                    found.insert(pos, (d2, i));
                    found.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_rec(near, q, k, found);
                if found.len() < k || diff * diff <= found[found.len() - 1].0 {
                    self.knn_rec(far, q, k, found);
                }
            }
        }
    }

    /// All points with `|p - q| <= radius`, ordered by index, with distances.
    pub fn within_radius(&self, q: &Point3<T>, radius: T) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        let r2 = radius * radius;
        self.radius_rec(0, q, r2, &mut out);
        out.sort_unstable_by_key(|&(i, _)| i);
        out.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }

    /// Number of points with `|p - q| <= radius`.
    pub fn count_within_radius(&self, q: &Point3<T>, radius: T) -> usize {
        let mut out = Vec::new();
        self.radius_rec(0, q, radius * radius, &mut out);
        out.len()
    }

    /// True when at least one point lies within `radius` of `q`.
    pub fn any_within(&self, q: &Point3<T>, radius: T) -> bool {
        self.nearest_sq(q).1 <= radius * radius
    }

    fn radius_rec(&self, node: usize, q: &Point3<T>, r2: T, out: &mut Vec<(usize, T)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 <= r2 {
                        out.push((i, d2));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.radius_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn brute_nearest(pts: &[Point3<f64>], q: &Point3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d2 = (p - q).norm_squared();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        best
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(KdTree::<f64>::build(&[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn single_point_is_always_nearest() {
        let p = Point3::new(0.3, -0.2, 4.0);
        let tree = KdTree::build(&[p]).unwrap();
        for q in random_points(20, 9) {
            assert_eq!(tree.nearest(&q).0, 0);
        }
    }

    #[test]
    fn nearest_by_inspection() {
        let tree = KdTree::<f64>::build(&[Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)])
            .unwrap();
        let (i, d) = tree.nearest(&Point3::new(0.4, 0.0, 0.0));
        assert_eq!(i, 0);
        assert!((d - 0.4).abs() < 1e-15);
    }

    #[test]
    fn equidistant_tie_returns_lower_index() {
        let tree =
            KdTree::build(&[Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(tree.nearest(&Point3::origin()).0, 0);
        // duplicate points, many of them across leaves
        let dup = vec![Point3::new(0.5, 0.5, 0.5); 40];
        let tree = KdTree::build(&dup).unwrap();
        assert_eq!(tree.nearest(&Point3::origin()).0, 0);
        let k = tree.knn(&Point3::origin(), 5);
        assert_eq!(
            k.iter().map(|x| x.0).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn thousand_points_match_linear_scan() {
        let pts = random_points(1000, 1);
        let tree = KdTree::build(&pts).unwrap();
        for q in random_points(100, 2) {
            let (i, d2) = tree.nearest_sq(&q);
            assert_eq!((i, d2), brute_nearest(&pts, &q));
        }
    }

    #[test]
    fn large_instances_match_linear_scan() {
        for (n, seed) in [(500usize, 10u64), (10_000, 11)] {
            let pts = random_points(n, seed);
            let tree = KdTree::build(&pts).unwrap();
            for q in random_points(50, seed + 100) {
                assert_eq!(tree.nearest_sq(&q), brute_nearest(&pts, &q));
            }
        }
    }

    #[test]
    fn zero_radius_returns_exact_duplicates() {
        let mut pts = random_points(200, 3);
        pts.push(pts[17]);
        let tree = KdTree::build(&pts).unwrap();
        let hits: Vec<usize> = tree
            .within_radius(&pts[17], 0.0)
            .into_iter()
            .map(|x| x.0)
            .collect();
        assert_eq!(hits, vec![17, 200]);
    }

    #[test]
    fn knn_and_radius_match_brute_force() {
        let pts = random_points(2000, 4);
        let tree = KdTree::build(&pts).unwrap();
        for q in random_points(30, 5) {
            let mut all: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| ((p - q).norm_squared(), i))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got: Vec<usize> = tree.knn(&q, 12).into_iter().map(|x| x.0).collect();
            let want: Vec<usize> = all.iter().take(12).map(|x| x.1).collect();
            assert_eq!(got, want);

            let r = 0.1;
            let mut want_r: Vec<usize> = all.iter().filter(|x| x.0 <= r * r).map(|x| x.1).collect();
            want_r.sort_unstable();
            let got_r: Vec<usize> = tree.within_radius(&q, r).into_iter().map(|x| x.0).collect();
            assert_eq!(got_r, want_r);
            assert_eq!(tree.count_within_radius(&q, r), want_r.len());
        }
    }

    #[test]
    fn works_in_single_precision() {
        let pts: Vec<Point3<f32>> = random_points(300, 6)
            .iter()
            .map(|p| p.cast::<f32>())
            .collect();
        let tree = KdTree::build(&pts).unwrap();
        let q = Point3::new(0.5f32, 0.5, 0.5);
        let want = pts
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .fold((f32::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        assert_eq!(tree.nearest_sq(&q).0, want.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nearest_equals_brute_force_on_grids(seed in 0u64..1000, n in 1usize..300) {
            // coarse integer grid: many exact ties
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point3<f64>> = (0..n)
                .map(|_| Point3::new(rng.random_range(0..4) as f64, rng.random_range(0..4) as f64, rng.random_range(0..4) as f64))
                .collect();
            let tree = KdTree::build(&pts).unwrap();
            for _ in 0..20 {
                let q = Point3::new(rng.random_range(-1..5) as f64 * 0.5, rng.random_range(-1..5) as f64 * 0.5, rng.random_range(-1..5) as f64 * 0.5);
                prop_assert_eq!(tree.nearest_sq(&q), brute_nearest(&pts, &q));
            }
        }
    }
}
