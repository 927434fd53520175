use crate::scalar::Real;

use super::{Point3, Vector3};

/// Axis-aligned bounding box, `min <= max` componentwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T: Real = f64> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    /// Builds a box from two corners, swapping components as needed.
    pub fn new(a: Point3<T>, b: Point3<T>) -> Self {
        Self {
            min: Point3::new(a.x.min(b.x), a.y.min(b.y), a.z.min(b.z)),
            max: Point3::new(a.x.max(b.x), a.y.max(b.y), a.z.max(b.z)),
        }
    }

    pub fn from_points(points: &[Point3<T>]) -> Option<Self> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vector3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<T> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> T {
        self.extent().norm()
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e.x * e.y * e.z
    }

    /// Inclusive containment test.
    #[inline]
    pub fn contains(&self, p: &Point3<T>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Whether `other` lies entirely inside `self`.
    pub fn contains_box(&self, other: &Aabb<T>) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn translated(&self, offset: Vector3<T>) -> Self {
        Self {
            min: self.min + offset,
            max: self.max + offset,
        }
    }

    pub fn union(&self, other: &Aabb<T>) -> Self {
        Self::new(
            Point3::new(
                self.min.x.min(other.min.x),
                self.min.y.min(other.min.y),
                self.min.z.min(other.min.z),
            ),
            Point3::new(
                self.max.x.max(other.max.x),
                self.max.y.max(other.max.y),
                self.max.z.max(other.max.z),
            ),
        )
    }
}
