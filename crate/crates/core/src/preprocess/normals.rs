use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::geom::{KdTree, Matrix3, Point3, PointCloud, Vector3};
use crate::scalar::Real;

/// Normals from the `k` nearest neighbours (plus the point itself), oriented
/// toward the capture origin.
pub fn estimate_normals<T: Real>(cloud: &PointCloud<T>, k: usize) -> Result<PointCloud<T>> {
    estimate_normals_toward(cloud, k, &Point3::origin())
}

/// Like [`estimate_normals`] with an explicit viewpoint.
pub fn estimate_normals_toward<T: Real>(
    cloud: &PointCloud<T>,
    k: usize,
    viewpoint: &Point3<T>,
) -> Result<PointCloud<T>> {
    if k < 3 {
        return Err(Error::InvalidConfig(format!(
            "normal estimation needs k >= 3, got {k}"
        )));
    }
    if cloud.len() <= k {
        return Err(Error::TooFewPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    let tree = KdTree::build(cloud.points())?;
    let pts = cloud.points();
    let normals = pts
        .iter()
        .map(|p| {
            let nbrs = tree.knn(p, k + 1);
            let mut n = smallest_axis(nbrs.iter().map(|&(i, _)| &pts[i]));
            let facing = n.dot(&(viewpoint - p));
            if facing < T::zero() || (facing == T::zero() && canonical_flip(&n)) {
                n = -n;
            }
            n
        })
        .collect();
    PointCloud::with_normals(pts.to_vec(), normals)
}

/// Direction of least variance of a point set (unit length).
pub(crate) fn smallest_axis<'a, T: Real>(
    points: impl Iterator<Item = &'a Point3<T>> + Clone,
) -> Vector3<T> {
    let (cov, _) = covariance(points);
    least_eigenvector(&cov)
}

pub(crate) fn covariance<'a, T: Real>(
    points: impl Iterator<Item = &'a Point3<T>> + Clone,
) -> (Matrix3<T>, Point3<T>) {
    let mut n = 0usize;
    let mut sum = Vector3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    let c = sum / T::from_count(n.max(1));
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    (cov / T::from_count(n.max(1)), Point3::from(c))
}

pub(crate) fn least_eigenvector<T: Real>(cov: &Matrix3<T>) -> Vector3<T> {
    let eig = SymmetricEigen::new(*cov);
    let i = eig.eigenvalues.imin();
    let v: Vector3<T> = eig.eigenvectors.column(i).into_owned();
    let n = v.norm();
    if n > T::zero() {
        v / n
    } else {
        Vector3::z()
    }
}

/// Deterministic sign when the viewpoint lies in the tangent plane:
/// make the first non-zero component positive.
fn canonical_flip<T: Real>(n: &Vector3<T>) -> bool {
    for k in 0..3 {
        if n[k] != T::zero() {
            return n[k] < T::zero();
        }
    }
    false
}
