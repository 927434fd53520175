//! Points, clouds, rigid transforms, bounding boxes and the closest-point RMS metric.

mod aabb;
mod cloud;
mod fit;
mod kdtree;
mod transform;

pub use aabb::Aabb;
pub use cloud::PointCloud;
pub use fit::best_rigid_fit;
pub use kdtree::KdTree;
pub use transform::RigidTransform;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Point3<T = f64> = nalgebra::Point3<T>;
pub type Vector3<T = f64> = nalgebra::Vector3<T>;
pub type Matrix3<T = f64> = nalgebra::Matrix3<T>;

/// Builds a nearest-neighbour index over `cloud`.
pub fn build_kdtree<T: Real>(cloud: &PointCloud<T>) -> Result<KdTree<T>> {
    KdTree::build(cloud.points())
}

/// Maps every point through `t`; normals are rotated only.
pub fn apply_transform<T: Real>(t: &RigidTransform<T>, cloud: &PointCloud<T>) -> PointCloud<T> {
    t.apply_cloud(cloud)
}

/// Root mean square of the model-to-scene nearest-neighbour distances, in millimetres.
///
/// Coordinates are metres; only the returned figure is converted.
pub fn rms_closest_point_mm<T: Real>(model: &PointCloud<T>, scene_tree: &KdTree<T>) -> Result<T> {
    rms_closest_point_mm_points(model.points(), scene_tree)
}

pub(crate) fn rms_closest_point_mm_points<T: Real>(
    model: &[Point3<T>],
    scene_tree: &KdTree<T>,
) -> Result<T> {
    if model.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut sum = 0.0f64;
    for p in model {
        let (_, d2) = scene_tree.nearest_sq(p);
        sum += d2.as_f64();
    }
    Ok(T::lit((sum / model.len() as f64).sqrt() * 1000.0))
}

/// Symmetric variant of [`rms_closest_point_mm`]: RMS over the union of
/// model-to-scene and scene-to-model nearest-neighbour distances.
pub fn rms_closest_point_symmetric_mm<T: Real>(
    model: &PointCloud<T>,
    scene: &PointCloud<T>,
) -> Result<T> {
    let scene_tree = KdTree::build(scene.points())?;
    let model_tree = KdTree::build(model.points())?;
    let mut sum = 0.0f64;
    for p in model.points() {
        sum += scene_tree.nearest_sq(p).1.as_f64();
    }
    for p in scene.points() {
        sum += model_tree.nearest_sq(p).1.as_f64();
    }
    let n = (model.len() + scene.len()) as f64;
    Ok(T::lit((sum / n).sqrt() * 1000.0))
}
