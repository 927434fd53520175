//! Moving-least-squares smoothing with optional voxel-grid dilation upsampling.
//!
//! Every point is replaced by its projection onto a bivariate polynomial
//! height field fitted, with Gaussian weights, over its radius neighbourhood in
//! a local frame given by the weighted PCA plane.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{KdTree, Point3, PointCloud, Vector3};
use crate::scalar::Real;

use super::normals::least_eigenvector;
use super::voxel::voxel_key;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Upsampling {
    None,
    VoxelGridDilation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlsConfig {
    /// Neighbourhood radius in metres.
    pub search_radius: f64,
    pub polynomial_order: usize,
    pub upsampling: Upsampling,
    /// Voxel edge for [`Upsampling::VoxelGridDilation`], metres.
    pub upsample_param: f64,
}

impl Default for MlsConfig {
    fn default() -> Self {
        Self {
            search_radius: 0.05,
            polynomial_order: 2,
            upsampling: Upsampling::None,
            upsample_param: 0.05,
        }
    }
}

impl MlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.search_radius > 0.0) {
            return Err(Error::InvalidConfig(
                "MLS search_radius must be positive".into(),
            ));
        }
        if self.polynomial_order < 1 {
            return Err(Error::InvalidConfig(
                "MLS polynomial_order must be at least 1".into(),
            ));
        }
        if self.upsampling != Upsampling::None && !(self.upsample_param > 0.0) {
            return Err(Error::InvalidConfig(
                "MLS upsample_param must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Local polynomial surface `w = f(u, v)` in the frame (origin, u, v, n).
struct LocalSurface<T: Real> {
    origin: Point3<T>,
    u: Vector3<T>,
    v: Vector3<T>,
    n: Vector3<T>,
    order: usize,
    coeffs: Vec<T>,
}

fn monomials<T: Real>(u: T, v: T, order: usize, out: &mut Vec<T>) {
    out.clear();
    let mut upow = T::one();
    for i in 0..=order {
        let mut vpow = T::one();
        for _ in 0..=(order - i) {
            out.push(upow * vpow);
            vpow *= v;
        }
        upow *= u;
    }
}

impl<T: Real> LocalSurface<T> {
    fn fit(query: &Point3<T>, nbrs: &[Point3<T>], radius: T, order: usize) -> Self {
        let h2 = radius * radius;
        let weights: Vec<T> = nbrs
            .iter()
            .map(|p| (-(p - query).norm_squared() / h2).exp())
            .collect();
        let wsum = weights.iter().fold(T::zero(), |a, &w| a + w);
        let mut mean = Vector3::zeros();
        for (p, &w) in nbrs.iter().zip(&weights) {
            mean += p.coords * w;
        }
        mean /= wsum;
        let mut cov = nalgebra::Matrix3::zeros();
        for (p, &w) in nbrs.iter().zip(&weights) {
            let d = p.coords - mean;
            cov += d * d.transpose() * w;
        }
        let n = least_eigenvector(&cov);
        let origin = Point3::from(query.coords - n * n.dot(&(query.coords - mean)));
        let helper = if n.x.magnitude() < T::lit(0.9) {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let u = n.cross(&helper).normalize();
        let v = n.cross(&u);

        let ncoef = (order + 1) * (order + 2) / 2;
        let mut surface = Self {
            origin,
            u,
            v,
            n,
            order,
            coeffs: Vec::new(),
        };
        if nbrs.len() < ncoef {
            return surface;
        }
        let mut a = DMatrix::<T>::zeros(nbrs.len(), ncoef);
        let mut b = DVector::<T>::zeros(nbrs.len());
        let mut row = Vec::with_capacity(ncoef);
        for (r, (p, &w)) in nbrs.iter().zip(&weights).enumerate() {
            let d = p - origin;
            monomials(d.dot(&u), d.dot(&v), order, &mut row);
            let sw = w.sqrt();
            for (c, m) in row.iter().enumerate() {
                a[(r, c)] = *m * sw;
            }
            b[r] = d.dot(&n) * sw;
        }
        if let Ok(x) = a.svd(true, true).solve(&b, T::lit(1e-12)) {
            if x.iter().all(|c| c.is_finite_value()) {
                surface.coeffs = x.iter().copied().collect();
            }
        }
        surface
    }

    fn project(&self, p: &Point3<T>) -> Point3<T> {
        let d = p - self.origin;
        let (pu, pv) = (d.dot(&self.u), d.dot(&self.v));
        let w = if self.coeffs.is_empty() {
            T::zero()
        } else {
            let mut row = Vec::with_capacity(self.coeffs.len());
            monomials(pu, pv, self.order, &mut row);
            row.iter()
                .zip(&self.coeffs)
                .fold(T::zero(), |a, (m, c)| a + *m * *c)
        };
        Point3::from(self.origin.coords + self.u * pu + self.v * pv + self.n * w)
    }
}

/// MLS smoothing; see [`MlsConfig`].
///
/// Points with fewer than three neighbours inside `search_radius` are dropped;
/// if that affects more than 10% of the cloud the radius is rejected. With
/// voxel-grid dilation the projected voxel seeds are appended after the
/// smoothed input points. Normals are not carried over.
pub fn mls_smooth<T: Real>(cloud: &PointCloud<T>, cfg: &MlsConfig) -> Result<PointCloud<T>> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pts = cloud.points();
    let tree = KdTree::build(pts)?;
    let radius = T::lit(cfg.search_radius);

    let neighborhoods: Vec<Vec<usize>> = pts
        .iter()
        .map(|p| {
            tree.within_radius(p, radius)
                .into_iter()
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    // the query point itself is in its own neighbourhood
    let sparse = neighborhoods.iter().filter(|n| n.len() < 4).count();
    if sparse * 10 > pts.len() {
        return Err(Error::RadiusTooSmall {
            without_neighbors: sparse,
            total: pts.len(),
        });
    }

    let mut surfaces: Vec<Option<LocalSurface<T>>> = Vec::with_capacity(pts.len());
    let mut out = Vec::with_capacity(pts.len());
    let mut buf = Vec::new();
    for (p, nbrs) in pts.iter().zip(&neighborhoods) {
        if nbrs.len() < 4 {
            surfaces.push(None);
            continue;
        }
        buf.clear();
        buf.extend(nbrs.iter().map(|&i| pts[i]));
        let s = LocalSurface::fit(p, &buf, radius, cfg.polynomial_order);
        out.push(s.project(p));
        surfaces.push(Some(s));
    }

    if cfg.upsampling == Upsampling::VoxelGridDilation {
        let voxel = T::lit(cfg.upsample_param);
        let mut occupied = BTreeSet::new();
        for p in pts {
            let k = voxel_key(p, voxel);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        occupied.insert([k[0] + dx, k[1] + dy, k[2] + dz]);
                    }
                }
            }
        }
        let half = T::lit(0.5);
        for key in occupied {
            let c = Point3::new(
                (T::lit(key[0] as f64) + half) * voxel,
                (T::lit(key[1] as f64) + half) * voxel,
                (T::lit(key[2] as f64) + half) * voxel,
            );
            let (j, d) = tree.nearest(&c);
            if d > radius {
                continue;
            }
            if let Some(s) = &surfaces[j] {
                out.push(s.project(&c));
            }
        }
    }
    Ok(PointCloud::from_points(out))
}
