use std::collections::HashMap;

use crate::geom::{Point3, PointCloud, Vector3};
use crate::scalar::Real;

/// Integer voxel coordinates of `p` for edge length `voxel`.
#[inline]
pub fn voxel_key<T: Real>(p: &Point3<T>, voxel: T) -> [i64; 3] {
    let k = |v: T| (v / voxel).floor().as_f64() as i64;
    [k(p.x), k(p.y), k(p.z)]
}

/// Groups point indices by voxel, in order of first occupancy. The grid starts
/// at the minimum corner of the points, so moving a cloud moves its voxels.
fn group<T: Real>(points: &[Point3<T>], voxel: T) -> Vec<Vec<usize>> {
    let mut slots: HashMap<[i64; 3], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let Some(first) = points.first() else {
        return groups;
    };
    let origin = points.iter().fold(*first, |m, p| m.inf(p));
    for (i, p) in points.iter().enumerate() {
        let key = voxel_key(&Point3::from(p - origin), voxel);
        let slot = *slots.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(i);
    }
    groups
}

/// One centroid per occupied voxel. Normals, when present, are averaged and renormalised.
///
/// Panics if `voxel` is not positive.
pub fn voxel_downsample<T: Real>(cloud: &PointCloud<T>, voxel: f64) -> PointCloud<T> {
    assert!(voxel > 0.0, "voxel size must be positive");
    let groups = group(cloud.points(), T::lit(voxel));
    let pts = cloud.points();
    let points: Vec<Point3<T>> = groups
        .iter()
        .map(|g| {
            let sum = g.iter().fold(Vector3::zeros(), |a, &i| a + pts[i].coords);
            Point3::from(sum / T::from_count(g.len()))
        })
        .collect();
    match cloud.normals() {
        Some(ns) => {
            let normals: Vec<Vector3<T>> = groups
                .iter()
                .map(|g| {
                    let sum = g.iter().fold(Vector3::zeros(), |a, &i| a + ns[i]);
                    let n = sum.norm();
                    if n > T::lit(1e-9) {
                        sum / n
                    } else {
                        ns[g[0]]
                    }
                })
                .collect();
            PointCloud::with_normals(points.clone(), normals)
                .unwrap_or_else(|_| PointCloud::from_points(points))
        }
        None => PointCloud::from_points(points),
    }
}

/// For every occupied voxel, the index of the input point closest to the voxel centroid.
/// Used to pick keypoints that keep their original normals.
pub fn voxel_representatives<T: Real>(cloud: &PointCloud<T>, voxel: f64) -> Vec<usize> {
    assert!(voxel > 0.0, "voxel size must be positive");
    let pts = cloud.points();
    // two-point voxels are exact ties, so distances within a hair of the best
    // keep the lower index whatever the rounding
    let tol = T::lit(1e-9 * voxel * voxel);
    group(pts, T::lit(voxel))
        .iter()
        .map(|g| {
            let c =
                g.iter().fold(Vector3::zeros(), |a, &i| a + pts[i].coords) / T::from_count(g.len());
            let mut best = g[0];
            let mut best_d = (pts[best].coords - c).norm_squared();
            for &i in &g[1..] {
                let d = (pts[i].coords - c).norm_squared();
                if d < best_d - tol {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}
