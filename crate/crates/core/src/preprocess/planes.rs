//! Iterative RANSAC plane removal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, Vector3};
use crate::scalar::Real;

use super::normals::{covariance, least_eigenvector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaneRemovalConfig {
    /// Inlier distance in metres.
    pub distance_threshold: f64,
    pub max_iterations: usize,
    /// A plane is removed only while it holds at least this share of the
    /// points still remaining.
    pub min_inlier_fraction: f64,
    pub rng_seed: u64,
    pub max_planes: usize,
}

impl Default for PlaneRemovalConfig {
    fn default() -> Self {
        Self {
            distance_threshold: 0.01,
            max_iterations: 1000,
            min_inlier_fraction: 0.25,
            rng_seed: 0,
            max_planes: 8,
        }
    }
}

impl PlaneRemovalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold > 0.0) {
            return Err(Error::InvalidConfig(
                "plane distance_threshold must be positive".into(),
            ));
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "min_inlier_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// `normal · p + offset = 0`, unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane<T: Real = f64> {
    pub normal: Vector3<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    fn through(a: &Point3<T>, b: &Point3<T>, c: &Point3<T>) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if !(len > T::lit(1e-12)) {
            return None;
        }
        let normal = n / len;
        Some(Self {
            normal,
            offset: -normal.dot(&a.coords),
        })
    }

    pub fn distance(&self, p: &Point3<T>) -> T {
        (self.normal.dot(&p.coords) + self.offset).magnitude()
    }

    /// `[a, b, c, d]` coefficients.
    pub fn coefficients(&self) -> [f64; 4] {
        [
            self.normal.x.as_f64(),
            self.normal.y.as_f64(),
            self.normal.z.as_f64(),
            self.offset.as_f64(),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct PlaneRemoval<T: Real = f64> {
    pub remaining: PointCloud<T>,
    /// Indices into the input cloud of `remaining`, ascending.
    pub remaining_indices: Vec<usize>,
    pub planes: Vec<Plane<T>>,
    /// Input indices removed with each plane, ascending.
    pub removed: Vec<Vec<usize>>,
}

fn inliers<T: Real>(plane: &Plane<T>, pts: &[Point3<T>], idx: &[usize], thr: T) -> Vec<usize> {
    idx.iter()
        .copied()
        .filter(|&i| plane.distance(&pts[i]) <= thr)
        .collect()
}

/// Removes dominant planes one after another until the best remaining plane
/// holds fewer than `min_inlier_fraction` of the remaining points.
pub fn remove_planes<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &PlaneRemovalConfig,
) -> Result<PlaneRemoval<T>> {
    cfg.validate()?;
    if cloud.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: cloud.len(),
        });
    }
    let pts = cloud.points();
    let thr = T::lit(cfg.distance_threshold);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut remaining: Vec<usize> = (0..pts.len()).collect();
    let mut planes = Vec::new();
    let mut removed = Vec::new();

    while remaining.len() >= 3 && planes.len() < cfg.max_planes {
        let n = remaining.len();
        let needed = (cfg.min_inlier_fraction * n as f64).ceil().max(3.0) as usize;
        let mut best: Option<(Plane<T>, usize)> = None;
        let mut budget = cfg.max_iterations;
        let mut it = 0;
        while it < budget {
            it += 1;
            let s = rand::seq::index::sample(&mut rng, n, 3);
            let (a, b, c) = (
                &pts[remaining[s.index(0)]],
                &pts[remaining[s.index(1)]],
                &pts[remaining[s.index(2)]],
            );
            let Some(plane) = Plane::through(a, b, c) else {
                continue;
            };
            let count = remaining
                .iter()
                .filter(|&&i| plane.distance(&pts[i]) <= thr)
                .count();
            if best.as_ref().is_none_or(|(_, c)| count > *c) {
                best = Some((plane, count));
                // adaptive stop for 99.9% confidence of an all-inlier sample
                let w = count as f64 / n as f64;
                let denom = (1.0 - w.powi(3)).ln();
                if denom < 0.0 {
                    let k = ((1.0 - 0.999f64).ln() / denom).ceil();
                    if k.is_finite() {
                        budget = budget.min(k.max(1.0) as usize);
                    }
                } else {
                    budget = it;
                }
            }
        }
        let Some((plane, _)) = best else { break };
        let mut members = inliers(&plane, pts, &remaining, thr);
        if members.len() >= 3 {
            // least-squares refinement on the consensus set
            let (cov, c) = covariance(members.iter().map(|&i| &pts[i]));
            let normal = least_eigenvector(&cov);
            let refined = Plane {
                normal,
                offset: -normal.dot(&c.coords),
            };
            let refit = inliers(&refined, pts, &remaining, thr);
            if refit.len() >= members.len() {
                members = refit;
                planes.push(refined);
            } else {
                planes.push(plane);
            }
        } else {
            planes.push(plane);
        }
        if members.len() < needed {
            planes.pop();
            break;
        }
        let mut keep = Vec::with_capacity(n - members.len());
        let mut m = members.iter().peekable();
        for &i in &remaining {
            if m.peek() == Some(&&i) {
                m.next();
            } else {
                keep.push(i);
            }
        }
        remaining = keep;
        removed.push(members);
    }

    Ok(PlaneRemoval {
        remaining: cloud.select(&remaining),
        remaining_indices: remaining,
        planes,
        removed,
    })
}
