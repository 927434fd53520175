//! The bundled manipulator model: a six-axis arm in a fixed pose built from
//! boxes and cylinders. Base frame origin on the floor at the base axis, z up,
//! the arm reaching along +x.

use crate::geom::{Point3, RigidTransform, Vector3};
use crate::io::TriangleMesh;

use super::primitives::{box_mesh, cylinder_between, cylinder_mesh};

fn placed_box(size: [f64; 3], center: [f64; 3], pitch: f64) -> TriangleMesh {
    let t =
        RigidTransform::from_translation(Vector3::new(center[0], center[1], center[2])).compose(
            &RigidTransform::from_axis_angle(&Vector3::y(), pitch, Vector3::zeros()),
        );
    box_mesh(size).transformed(&t)
}

/// Triangle mesh of the bundled robot.
pub fn robot_mesh() -> TriangleMesh {
    // the base stands on the floor, so its bottom cap is never seen
    let mut m = cylinder_mesh(0.18, 0.15);
    m.triangles
        .retain(|t| t.iter().any(|&v| m.vertices[v as usize].z > 0.0));
    // turret
    m.append(&placed_box([0.30, 0.26, 0.20], [0.03, 0.0, 0.25], 0.0));
    // cable box on the turret's -y side
    m.append(&placed_box([0.10, 0.05, 0.12], [-0.08, -0.155, 0.24], 0.0));
    // shoulder axis
    m.append(&cylinder_between(
        0.10,
        Point3::new(0.10, -0.15, 0.42),
        Point3::new(0.10, 0.15, 0.42),
    ));
    // upper arm from shoulder (0.10, 0.42) to elbow (0.25, 0.95), leaning forward
    let (dx, dz) = (0.15f64, 0.53f64);
    m.append(&placed_box(
        [0.12, 0.14, dz.hypot(dx)],
        [0.175, 0.0, 0.685],
        dx.atan2(dz),
    ));
    // elbow axis
    m.append(&cylinder_between(
        0.08,
        Point3::new(0.25, -0.11, 0.95),
        Point3::new(0.25, 0.11, 0.95),
    ));
    // axis-3 motor behind the elbow, offset to +y
    m.append(&placed_box([0.16, 0.10, 0.12], [0.12, 0.13, 1.0], 0.0));
    // forearm
    m.append(&placed_box([0.55, 0.10, 0.10], [0.525, 0.0, 0.95], 0.0));
    // wrist and flange
    m.append(&cylinder_between(
        0.05,
        Point3::new(0.80, 0.0, 0.95),
        Point3::new(0.90, 0.0, 0.95),
    ));
    m.append(&cylinder_between(
        0.04,
        Point3::new(0.90, 0.0, 0.95),
        Point3::new(0.93, 0.0, 0.95),
    ));
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        let m = robot_mesh();
        let b = m.aabb().unwrap();
        assert!(b.min.z.abs() < 1e-12);
        assert!((b.max.x - 0.93).abs() < 1e-9);
        let area = m.total_area();
        // open underneath
        assert!((0..m.triangles.len()).all(|i| m.triangle(i).iter().any(|p| p.z > 0.0)));
        assert!(area > 1.2 && area < 2.2, "{area}");
    }
}
