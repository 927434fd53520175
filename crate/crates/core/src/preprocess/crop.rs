use serde::{Deserialize, Serialize};

use crate::geom::{Point3, PointCloud};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    pub center: [f64; 3],
    /// Metres.
    pub radius: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            center: [0.0; 3],
            radius: 2.0,
        }
    }
}

impl CropConfig {
    pub fn around(center: [f64; 3]) -> Self {
        Self {
            center,
            ..Self::default()
        }
    }
}

/// Indices of points with `|p - center| <= radius`, in input order.
pub fn sphere_crop_indices<T: Real>(cloud: &PointCloud<T>, cfg: &CropConfig) -> Vec<usize> {
    let c = Point3::new(
        T::lit(cfg.center[0]),
        T::lit(cfg.center[1]),
        T::lit(cfg.center[2]),
    );
    let r2 = T::lit(cfg.radius) * T::lit(cfg.radius);
    cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| (*p - c).norm_squared() <= r2)
        .map(|(i, _)| i)
        .collect()
}

/// Keeps the points inside the sphere; order and normals are preserved.
pub fn sphere_crop<T: Real>(cloud: &PointCloud<T>, cfg: &CropConfig) -> PointCloud<T> {
    cloud.select(&sphere_crop_indices(cloud, cfg))
}
