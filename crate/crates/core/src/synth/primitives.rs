//! Closed triangle meshes of simple solids, in a local frame.

use std::f64::consts::TAU;

use crate::geom::{Point3, RigidTransform, Vector3};
use crate::io::TriangleMesh;

/// Segments around a cylinder.
pub const CYLINDER_SEGMENTS: usize = 32;

fn mesh(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh {
        vertices,
        triangles,
    }
}

/// Box with full edge lengths `size`, centred on the origin.
pub fn box_mesh(size: [f64; 3]) -> TriangleMesh {
    let h = Vector3::new(size[0], size[1], size[2]) / 2.0;
    let v: Vec<Point3> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    // outward winding
    let faces = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let tris = faces
        .iter()
        .flat_map(|f| [[f[0], f[1], f[2]], [f[0], f[2], f[3]]])
        .collect();
    mesh(v, tris)
}

/// Rectangle `sx` by `sy` in the local xy-plane, centred, facing +z.
pub fn plane_mesh(sx: f64, sy: f64) -> TriangleMesh {
    let (x, y) = (sx / 2.0, sy / 2.0);
    mesh(
        vec![
            Point3::new(-x, -y, 0.0),
            Point3::new(x, -y, 0.0),
            Point3::new(x, y, 0.0),
            Point3::new(-x, y, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Capped cylinder along local z from `z = 0` to `z = height`.
pub fn cylinder_mesh(radius: f64, height: f64) -> TriangleMesh {
    let n = CYLINDER_SEGMENTS;
    let mut v = Vec::with_capacity(2 * n + 2);
    for z in [0.0, height] {
        for k in 0..n {
            let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
            v.push(Point3::new(radius * c, radius * s, z));
        }
    }
    v.push(Point3::new(0.0, 0.0, 0.0));
    v.push(Point3::new(0.0, 0.0, height));
    let (bottom, top) = ((2 * n) as u32, (2 * n + 1) as u32);
    let mut t = Vec::with_capacity(4 * n);
    for k in 0..n {
        let (a, b) = (k as u32, ((k + 1) % n) as u32);
        let (c, d) = (a + n as u32, b + n as u32);
        t.push([a, b, d]);
        t.push([a, d, c]);
        t.push([bottom, b, a]);
        t.push([top, c, d]);
    }
    mesh(v, t)
}

/// Cylinder between two points.
pub fn cylinder_between(radius: f64, from: Point3, to: Point3) -> TriangleMesh {
    let axis = to - from;
    let len = axis.norm();
    let dir = axis / len;
    let z = Vector3::z();
    let rot = if (dir - z).norm() < 1e-12 {
        RigidTransform::identity()
    } else if (dir + z).norm() < 1e-12 {
        RigidTransform::from_axis_angle(&Vector3::x(), std::f64::consts::PI, Vector3::zeros())
    } else {
        let ax = z.cross(&dir);
        RigidTransform::from_axis_angle(
            &ax.normalize(),
            ax.norm().atan2(z.dot(&dir)),
            Vector3::zeros(),
        )
    };
    let t = RigidTransform::from_translation(from.coords).compose(&rot);
    cylinder_mesh(radius, len).transformed(&t)
}
