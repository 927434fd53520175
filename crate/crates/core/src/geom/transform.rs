use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::{Matrix3, Point3, PointCloud, Vector3};

/// Proper rigid motion `p -> R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform<T: Real = f64> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for RigidTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// No validation; see [`RigidTransform::is_proper`].
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation by `yaw` radians about +z followed by a translation.
    pub fn from_yaw(yaw: T, translation: Vector3<T>) -> Self {
        Self {
            rotation: rotation_z(yaw),
            translation,
        }
    }

    pub fn from_axis_angle(axis: &Vector3<T>, angle: T, translation: Vector3<T>) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        let rotation = *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix();
        Self {
            rotation,
            translation,
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    pub fn apply_points(&self, points: &[Point3<T>]) -> Vec<Point3<T>> {
        points.iter().map(|p| self.apply_point(p)).collect()
    }

    pub fn apply_cloud(&self, cloud: &PointCloud<T>) -> PointCloud<T> {
        let points = self.apply_points(cloud.points());
        match cloud.normals() {
            Some(ns) => {
                let normals = ns.iter().map(|n| self.rotation * n).collect();
                PointCloud::with_normals(points, normals).unwrap_or_else(|_| {
                    // rotation drifted from orthonormal beyond 1e-6; drop normals
                    PointCloud::from_points(self.apply_points(cloud.points()))
                })
            }
            None => PointCloud::from_points(points),
        }
    }

    /// Heading of the rotated x axis in the world xy-plane.
    pub fn yaw(&self) -> T {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> T {
        let c = (self.rotation.trace() - T::one()) * T::lit(0.5);
        c.clamp(-T::one(), T::one()).acos()
    }

    /// Translation distance and rotation angle between two poses.
    pub fn error_to(&self, other: &Self) -> (T, T) {
        let rel = self.inverse().compose(other);
        (
            (self.translation - other.translation).norm(),
            rel.rotation_angle(),
        )
    }

    /// Orthonormality and determinant check.
    pub fn is_proper(&self, tol: T) -> bool {
        let rtr = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let orth = rtr.iter().all(|v| v.magnitude() <= tol);
        orth && (self.rotation.determinant() - T::one()).magnitude() <= tol
    }

    /// Projects the rotation back onto SO(3).
    pub fn orthonormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * vt).determinant() < T::zero() {
            d[(2, 2)] = -T::one();
        }
        Self {
            rotation: u * d * vt,
            translation: self.translation,
        }
    }

    pub fn cast<U: Real>(&self) -> RigidTransform<U> {
        RigidTransform {
            rotation: self.rotation.map(|v| U::lit(v.as_f64())),
            translation: self.translation.map(|v| U::lit(v.as_f64())),
        }
    }

    /// Homogeneous 4x4 matrix, row-major.
    pub fn to_homogeneous(&self) -> nalgebra::Matrix4<T> {
        let mut m = nalgebra::Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

pub(crate) fn rotation_z<T: Real>(yaw: T) -> Matrix3<T> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(
        c,
        -s,
        T::zero(),
        s,
        c,
        T::zero(),
        T::zero(),
        T::zero(),
        T::one(),
    )
}

/// Plain-array form used by config files: rotation rows plus translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRepr {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<RigidTransform<f64>> for TransformRepr {
    fn from(t: RigidTransform<f64>) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for (r, row) in rotation.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = t.rotation[(r, c)];
            }
        }
        Self {
            rotation,
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<TransformRepr> for RigidTransform<f64> {
    fn from(r: TransformRepr) -> Self {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        RigidTransform::new(m, Vector3::from(r.translation))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            -1.0..1.0f64,
            -1.0..1.0f64,
            0.1..1.0f64,
            -3.1..3.1f64,
            -10.0..10.0f64,
            -10.0..10.0f64,
            -10.0..10.0f64,
        )
            .prop_map(|(ax, ay, az, angle, x, y, z)| {
                RigidTransform::from_axis_angle(
                    &Vector3::new(ax, ay, az),
                    angle,
                    Vector3::new(x, y, z),
                )
            })
    }

    fn max_abs_diff(a: &RigidTransform, b: &RigidTransform) -> f64 {
        let r = (a.rotation - b.rotation).abs().max();
        let t = (a.translation - b.translation).abs().max();
        r.max(t)
    }

    #[test]
    fn identity_leaves_cloud_bitwise_equal() {
        let c = PointCloud::with_normals(
            vec![Point3::new(0.1, 0.2, 0.3), Point3::new(-5.0, 1e-7, 3.0)],
            vec![Vector3::x(), Vector3::new(0.0, 0.6, 0.8)],
        )
        .unwrap();
        assert_eq!(RigidTransform::identity().apply_cloud(&c), c);
    }

    #[test]
    fn pure_translation_moves_origin() {
        let t = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.apply_point(&Point3::origin()), Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn normals_rotate_without_translating() {
        let c = PointCloud::with_normals(vec![Point3::origin()], vec![Vector3::x()]).unwrap();
        let t = RigidTransform::from_yaw(std::f64::consts::FRAC_PI_2, Vector3::new(5.0, 0.0, 0.0));
        let out = t.apply_cloud(&c);
        let n = out.normals().unwrap()[0];
        assert!((n - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn yaw_extraction_inverts_from_yaw() {
        for k in -30..=30 {
            let yaw = k as f64 * 0.1;
            let t = RigidTransform::from_yaw(yaw, Vector3::zeros());
            assert!((t.yaw() - yaw).abs() < 1e-12);
        }
    }

    #[test]
    fn repr_roundtrip() {
        let t = RigidTransform::from_axis_angle(
            &Vector3::new(1.0, 0.0, 1.0),
            0.4,
            Vector3::new(1.0, 2.0, 3.0),
        );
        let back: RigidTransform = TransformRepr::from(t).into();
        assert_eq!(back, t);
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let mut t = RigidTransform::from_yaw(0.3, Vector3::zeros());
        t.rotation[(0, 0)] += 1e-4;
        assert!(!t.is_proper(1e-9));
        assert!(t.orthonormalized().is_proper(1e-9));
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(max_abs_diff(&left, &right) < 1e-9);
        }

        #[test]
        fn inverse_composes_to_identity(t in arb_transform()) {
            prop_assert!(max_abs_diff(&t.inverse().compose(&t), &RigidTransform::identity()) < 1e-9);
            prop_assert!(max_abs_diff(&t.compose(&t.inverse()), &RigidTransform::identity()) < 1e-9);
            prop_assert!(t.compose(&t.inverse()).is_proper(1e-9));
        }

        #[test]
        fn apply_then_inverse_restores_points(t in arb_transform(), x in -5.0..5.0f64, y in -5.0..5.0f64, z in -5.0..5.0f64) {
            let p = Point3::new(x, y, z);
            let back = t.inverse().apply_point(&t.apply_point(&p));
            prop_assert!((back - p).abs().max() < 1e-9);
            // length preserved
            let v = Vector3::new(x, y, z);
            prop_assert!((t.apply_vector(&v).norm() - v.norm()).abs() < 1e-9);
        }
    }
}
