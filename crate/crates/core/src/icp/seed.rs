use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geom::{Point3, RigidTransform, Vector3};
use crate::scalar::Real;

/// Approximate robot base position and heading placed by the user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPose {
    pub position: [f64; 3],
    /// Radians about world z, in (-π, π].
    pub yaw: f64,
}

impl SeedPose {
    pub fn new(position: [f64; 3], yaw: f64) -> Self {
        Self {
            position,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn point<T: Real>(&self) -> Point3<T> {
        Point3::new(
            T::lit(self.position[0]),
            T::lit(self.position[1]),
            T::lit(self.position[2]),
        )
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Rotation by `yaw` about world z, translation `position`.
pub fn seed_to_transform<T: Real>(seed: &SeedPose) -> RigidTransform<T> {
    let p = seed.point::<T>();
    RigidTransform::from_yaw(T::lit(seed.yaw), Vector3::new(p.x, p.y, p.z))
}
