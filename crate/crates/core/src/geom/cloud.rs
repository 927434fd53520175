use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{Aabb, Point3, Vector3};

/// Ordered list of points with optional per-point unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T: Real = f64> {
    points: Vec<Point3<T>>,
    normals: Option<Vec<Vector3<T>>>,
}

impl<T: Real> Default for PointCloud<T> {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            normals: None,
        }
    }
}

impl<T: Real> PointCloud<T> {
    pub fn from_points(points: Vec<Point3<T>>) -> Self {
        Self {
            points,
            normals: None,
        }
    }

    /// Attaches normals; fails if the lengths differ or a normal is not unit length.
    pub fn with_normals(points: Vec<Point3<T>>, normals: Vec<Vector3<T>>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::InvalidConfig(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        let tol = T::lit(1e-6);
        if let Some(i) = normals
            .iter()
            .position(|n| (n.norm() - T::one()).magnitude() > tol)
        {
            return Err(Error::InvalidConfig(format!(
                "normal {i} is not unit length"
            )));
        }
        Ok(Self {
            points,
            normals: Some(normals),
        })
    }

    /// Checks that all coordinates are finite.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite_value() && p.y.is_finite_value() && p.z.is_finite_value()) {
                return Err(Error::InvalidConfig(format!("point {i} is not finite")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    #[inline]
    pub fn normals(&self) -> Option<&[Vector3<T>]> {
        self.normals.as_deref()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3<T>> {
        self.points
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    /// Sub-cloud made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Concatenates two clouds. Normals survive only if both sides carry them.
    pub fn merged(&self, other: &Self) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => {
                let mut n = a.clone();
                n.extend_from_slice(b);
                Some(n)
            }
            _ => None,
        };
        Self { points, normals }
    }

    pub fn aabb(&self) -> Option<Aabb<T>> {
        Aabb::from_points(&self.points)
    }

    pub fn centroid(&self) -> Option<Point3<T>> {
        centroid(&self.points)
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        let conv = |v: T| U::lit(v.as_f64());
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| Point3::new(conv(p.x), conv(p.y), conv(p.z)))
                .collect(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| {
                        let v = Vector3::new(conv(n.x), conv(n.y), conv(n.z));
                        v / v.norm()
                    })
                    .collect()
            }),
        }
    }
}

impl<T: Real> FromIterator<Point3<T>> for PointCloud<T> {
    fn from_iter<I: IntoIterator<Item = Point3<T>>>(iter: I) -> Self {
        Self::from_points(iter.into_iter().collect())
    }
}

pub(crate) fn centroid<T: Real>(points: &[Point3<T>]) -> Option<Point3<T>> {
    if points.is_empty() {
        return None;
    }
    let mut acc = Vector3::zeros();
    for p in points {
        acc += p.coords;
    }
    Some(Point3::from(acc / T::from_count(points.len())))
}
