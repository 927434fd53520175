//! Point-to-point ICP from a seed guess, and the four-start wrapper used after
//! automatic detection.

mod seed;

pub use seed::{normalize_yaw, seed_to_transform, SeedPose};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{best_rigid_fit, KdTree, Point3, PointCloud, RigidTransform, Vector3};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    /// Correspondence gate in metres.
    pub max_correspondence_distance: f64,
    pub max_iterations: usize,
    /// Metres. Also used, in radians, for the incremental rotation.
    pub translation_epsilon: f64,
    /// Millimetres.
    pub rms_epsilon: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_correspondence_distance: 1.0,
            max_iterations: 500,
            translation_epsilon: 1e-6,
            rms_epsilon: 1e-4,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_correspondence_distance > 0.0
            && self.max_iterations > 0
            && self.translation_epsilon > 0.0
            && self.rms_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "ICP parameters must all be positive".into(),
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult<T: Real = f64> {
    /// Model frame to scene frame.
    pub transform: RigidTransform<T>,
    pub rms_mm: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Gated nearest-neighbour pairs `(model point under t, scene point)`.
fn correspond<T: Real>(
    model: &[Point3<T>],
    tree: &KdTree<T>,
    t: &RigidTransform<T>,
    gate2: T,
    src: &mut Vec<Point3<T>>,
    dst: &mut Vec<Point3<T>>,
) {
    src.clear();
    dst.clear();
    for p in model {
        let q = t.apply_point(p);
        let (j, d2) = tree.nearest_sq(&q);
        if d2 <= gate2 {
            src.push(q);
            dst.push(tree.points()[j]);
        }
    }
}

fn pair_rms_mm<T: Real>(src: &[Point3<T>], dst: &[Point3<T>]) -> f64 {
    if src.is_empty() {
        return f64::INFINITY;
    }
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(a, b)| (a - b).norm_squared().as_f64())
        .sum();
    (sum / src.len() as f64).sqrt() * 1000.0
}

/// ICP against a scene given as a prebuilt index.
pub fn register_icp_tree<T: Real>(
    model: &PointCloud<T>,
    scene: &KdTree<T>,
    init: &RigidTransform<T>,
    cfg: &IcpConfig,
) -> Result<RegistrationResult<T>> {
    cfg.validate()?;
    if model.is_empty() || scene.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pts = model.points();
    let gate2 = T::lit(cfg.max_correspondence_distance) * T::lit(cfg.max_correspondence_distance);
    let eps = T::lit(cfg.translation_epsilon);
    let mut t = *init;
    let mut src = Vec::with_capacity(pts.len());
    let mut dst = Vec::with_capacity(pts.len());
    let mut prev_rms: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        correspond(pts, scene, &t, gate2, &mut src, &mut dst);
        if src.is_empty() && iterations == 1 {
            return Err(Error::NoCorrespondences {
                max_distance: cfg.max_correspondence_distance,
            });
        }
        let Some(step) = best_rigid_fit(&src, &dst) else {
            break;
        };
        t = step.compose(&t).orthonormalized();
        let moved: Vec<Point3<T>> = step.apply_points(&src);
        let rms = pair_rms_mm(&moved, &dst);
        let small_step = step.translation.norm() < eps && step.rotation_angle() < eps;
        let flat = prev_rms.is_some_and(|p| (p - rms).abs() < cfg.rms_epsilon);
        prev_rms = Some(rms);
        if small_step || flat {
            converged = true;
            break;
        }
    }

    correspond(pts, scene, &t, gate2, &mut src, &mut dst);
    if src.len() < 3 {
        converged = false;
    }
    Ok(RegistrationResult {
        transform: t,
        rms_mm: pair_rms_mm(&src, &dst),
        iterations_used: iterations,
        converged,
    })
}

/// Point-to-point ICP of `model` into `scene` starting from `init`.
///
/// Fails with [`Error::NoCorrespondences`] when nothing lies inside the gate at
/// the initial pose. A later collapse below three pairs or hitting the
/// iteration cap is reported through `converged = false`.
pub fn register_icp<T: Real>(
    model: &PointCloud<T>,
    scene: &PointCloud<T>,
    init: &RigidTransform<T>,
    cfg: &IcpConfig,
) -> Result<RegistrationResult<T>> {
    if model.is_empty() || scene.is_empty() {
        return Err(Error::EmptyCloud);
    }
    register_icp_tree(model, &KdTree::build(scene.points())?, init, cfg)
}

/// Outcome of the four-start wrapper with every attempt kept.
#[derive(Debug)]
pub struct MultiStart<T: Real = f64> {
    pub best: RegistrationResult<T>,
    /// 0..4, the start yaw is `90° * start_index`.
    pub start_index: usize,
    pub attempts: Vec<Result<RegistrationResult<T>>>,
}

/// Initial pose of start `k`: the model's bounding-box centre placed on
/// `center`, turned `k * 90°` about the vertical.
pub fn four_rotation_init<T: Real>(
    model: &PointCloud<T>,
    center: &Point3<T>,
    k: usize,
) -> RigidTransform<T> {
    let c = model
        .aabb()
        .map(|b| b.center())
        .unwrap_or_else(Point3::origin);
    let yaw = T::frac_pi_2() * T::from_count(k % 4);
    RigidTransform::from_translation(center.coords)
        .compose(&RigidTransform::from_yaw(yaw, Vector3::zeros()))
        .compose(&RigidTransform::from_translation(-c.coords))
}

/// Poses closer than this are treated as the same solution when picking
/// among the four starts.
const SAME_POSE_MM: f64 = 5.0;
const SAME_POSE_DEG: f64 = 1.0;

/// ICP from four yaw starts (0°, 90°, 180°, 270°) about `center`.
///
/// The winner is the converged run with the smallest rms. Runs that land on
/// the same pose as the winner (within 5 mm and 1°) count as ties; among them
/// the start whose yaw is closest to the final yaw wins, then the lower index.
pub fn register_icp_4rot_detailed<T: Real>(
    model: &PointCloud<T>,
    scene: &KdTree<T>,
    center: &Point3<T>,
    cfg: &IcpConfig,
) -> Result<MultiStart<T>> {
    let attempts: Vec<Result<RegistrationResult<T>>> = (0..4)
        .map(|k| register_icp_tree(model, scene, &four_rotation_init(model, center, k), cfg))
        .collect();
    let ok: Vec<(usize, &RegistrationResult<T>)> = attempts
        .iter()
        .enumerate()
        .filter_map(|(k, r)| {
            r.as_ref()
                .ok()
                .filter(|r| r.converged && r.rms_mm.is_finite())
                .map(|r| (k, r))
        })
        .collect();
    let Some(&(_, best)) = ok
        .iter()
        .min_by(|a, b| a.1.rms_mm.total_cmp(&b.1.rms_mm).then(a.0.cmp(&b.0)))
    else {
        return Err(Error::AllStartsFailed);
    };
    let final_yaw = best.transform.yaw().as_f64();
    let (start_index, chosen) = ok
        .iter()
        .filter(|(_, r)| {
            let (dt, da) = r.transform.error_to(&best.transform);
            dt.as_f64() * 1000.0 <= SAME_POSE_MM && da.as_f64().to_degrees() <= SAME_POSE_DEG
        })
        .min_by(|a, b| {
            let da = yaw_gap(final_yaw, a.0);
            let db = yaw_gap(final_yaw, b.0);
            da.total_cmp(&db).then(a.0.cmp(&b.0))
        })
        .map(|&(k, r)| (k, r.clone()))
        .expect("the best run is equivalent to itself");
    Ok(MultiStart {
        best: chosen,
        start_index,
        attempts,
    })
}

fn yaw_gap(yaw: f64, k: usize) -> f64 {
    normalize_yaw(yaw - std::f64::consts::FRAC_PI_2 * k as f64).abs()
}

/// See [`register_icp_4rot_detailed`].
pub fn register_icp_4rot<T: Real>(
    model: &PointCloud<T>,
    scene: &PointCloud<T>,
    center: &Point3<T>,
    cfg: &IcpConfig,
) -> Result<RegistrationResult<T>> {
    if model.is_empty() || scene.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(register_icp_4rot_detailed(model, &KdTree::build(scene.points())?, center, cfg)?.best)
}
