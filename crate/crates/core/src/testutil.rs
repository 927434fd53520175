//! Shapes shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{Point3, PointCloud};

/// Points on the surface of an L-shaped block with a post; no rotational symmetry.
pub(crate) fn bracket(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes = [
        ([0.0, 0.0, 0.0], [0.6, 0.2, 0.1]),
        ([0.0, 0.0, 0.1], [0.15, 0.45, 0.25]),
        ([0.45, 0.05, 0.1], [0.55, 0.15, 0.5]),
    ];
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let (lo, hi) = boxes[pts.len() % 3];
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = rng.random_range(lo[k]..hi[k]);
        }
        // snap one coordinate to a face
        let face = rng.random_range(0..3);
        p[face] = if rng.random_bool(0.5) {
            lo[face]
        } else {
            hi[face]
        };
        pts.push(Point3::new(p[0], p[1], p[2]));
    }
    PointCloud::from_points(pts)
}
