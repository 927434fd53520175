use crate::scalar::Real;

use super::cloud::centroid;
use super::{Matrix3, Point3, RigidTransform};

/// Closed-form least-squares rigid motion taking `src[i]` onto `dst[i]`
/// (SVD of the cross-covariance, reflection-corrected).
///
/// Returns `None` for fewer than three pairs or mismatched lengths.
pub fn best_rigid_fit<T: Real>(src: &[Point3<T>], dst: &[Point3<T>]) -> Option<RigidTransform<T>> {
    if src.len() != dst.len() || src.len() < 3 {
        return None;
    }
    let cs = centroid(src)?;
    let cd = centroid(dst)?;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let mut correction = Matrix3::identity();
    if (v * u.transpose()).determinant() < T::zero() {
        correction[(2, 2)] = -T::one();
    }
    let rotation = v * correction * u.transpose();
    let translation = cd.coords - rotation * cs.coords;
    Some(RigidTransform::new(rotation, translation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;
    use nalgebra::{Matrix4, Quaternion, SymmetricEigen, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Quaternion (Horn) solution: an independent route to the same optimum.
    fn horn_fit(src: &[Point3<f64>], dst: &[Point3<f64>]) -> RigidTransform {
        let n = src.len() as f64;
        let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
        let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
        let mut m = Matrix3::zeros();
        for (s, d) in src.iter().zip(dst) {
            m += (s.coords - cs) * (d.coords - cd).transpose();
        }
        let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
        let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
        let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        let k = Matrix4::new(
            sxx + syy + szz,
            syz - szy,
            szx - sxz,
            sxy - syx,
            syz - szy,
            sxx - syy - szz,
            sxy + syx,
            szx + sxz,
            szx - sxz,
            sxy + syx,
            -sxx + syy - szz,
            syz + szy,
            sxy - syx,
            szx + sxz,
            syz + szy,
            -sxx - syy + szz,
        );
        let eig = SymmetricEigen::new(k);
        let imax = eig.eigenvalues.imax();
        let q = eig.eigenvectors.column(imax);
        let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
        let r = *uq.to_rotation_matrix().matrix();
        RigidTransform::new(r, cd - r * cs)
    }

    fn sum_sq(t: &RigidTransform, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
        src.iter()
            .zip(dst)
            .map(|(s, d)| (t.apply_point(s) - d).norm_squared())
            .sum()
    }

    #[test]
    fn matches_quaternion_oracle_on_random_ten_point_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let src: Vec<Point3<f64>> = (0..10)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            let truth = RigidTransform::from_axis_angle(
                &Vector3::new(rng.random(), rng.random(), rng.random::<f64>() + 0.1),
                rng.random_range(-3.0..3.0),
                Vector3::new(rng.random(), rng.random(), rng.random()),
            );
            let dst: Vec<Point3<f64>> = src
                .iter()
                .map(|p| {
                    truth.apply_point(p)
                        + Vector3::new(
                            rng.random_range(-0.05..0.05),
                            rng.random_range(-0.05..0.05),
                            rng.random_range(-0.05..0.05),
                        )
                })
                .collect();
            let svd = best_rigid_fit(&src, &dst).unwrap();
            let horn = horn_fit(&src, &dst);
            assert!(svd.is_proper(1e-9));
            assert!((svd.rotation - horn.rotation).abs().max() < 1e-8);
            assert!((svd.translation - horn.translation).abs().max() < 1e-8);
            // no perturbation of the optimum lowers the objective
            let base = sum_sq(&svd, &src, &dst);
            for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
                for eps in [1e-4, -1e-4] {
                    let nudged =
                        RigidTransform::from_axis_angle(&axis, eps, axis * eps).compose(&svd);
                    assert!(sum_sq(&nudged, &src, &dst) >= base - 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_correspondences_are_recovered() {
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let t = RigidTransform::from_yaw(0.7, Vector3::new(1.0, -2.0, 0.5));
        let dst = t.apply_points(&src);
        let fit = best_rigid_fit(&src, &dst).unwrap();
        assert!((fit.rotation - t.rotation).abs().max() < 1e-12);
        assert!((fit.translation - t.translation).abs().max() < 1e-12);
    }

    #[test]
    fn planar_sets_do_not_reflect() {
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        let t =
            RigidTransform::from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 2.5, Vector3::zeros());
        let fit = best_rigid_fit(&src, &t.apply_points(&src)).unwrap();
        assert!(fit.is_proper(1e-9));
        assert!((fit.rotation - t.rotation).abs().max() < 1e-9);
    }

    #[test]
    fn too_few_pairs() {
        let p = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        assert!(best_rigid_fit(&p, &p).is_none());
    }
}
