//! Global alignment of a segmented cluster by 4-point congruent sets, and the
//! segment-then-register pipeline around it.

mod fourpcs;

pub use fourpcs::{lcp_score, register_4pcs, CoarseResult, FourPcsConfig};

use log::debug;

use crate::error::{Error, Result};
use crate::geom::{KdTree, Point3, PointCloud, Vector3};
use crate::icp::{register_icp_tree, IcpConfig, RegistrationResult};
use crate::preprocess::{euclidean_cluster, remove_planes, ClusterConfig, PlaneRemovalConfig};
use crate::scalar::Real;

/// Extent of the smallest z-aligned box around `points`, searched over yaw in
/// 1° steps. Unlike the axis-aligned box it does not grow when the object turns.
pub fn upright_extent<T: Real>(points: &[Point3<T>]) -> Vector3<f64> {
    if points.is_empty() {
        return Vector3::zeros();
    }
    let (zmin, zmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let z = p.z.as_f64();
            (lo.min(z), hi.max(z))
        });
    let mut best = Vector3::new(f64::INFINITY, f64::INFINITY, zmax - zmin);
    for deg in 0..90 {
        let (s, c) = (deg as f64).to_radians().sin_cos();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            let (x, y) = (p.x.as_f64(), p.y.as_f64());
            let uv = [c * x + s * y, -s * x + c * y];
            for k in 0..2 {
                lo[k] = lo[k].min(uv[k]);
                hi[k] = hi[k].max(uv[k]);
            }
        }
        let (ex, ey) = (hi[0] - lo[0], hi[1] - lo[1]);
        if ex * ey < best.x * best.y {
            best.x = ex;
            best.y = ey;
        }
    }
    best
}

/// Bounding-diagonal window, relative to the model, for clusters worth registering.
pub const DIAGONAL_WINDOW: (f64, f64) = (0.5, 2.0);
/// A cluster whose upright box exceeds the model's by this factor is taken to
/// be the robot merged with its surroundings.
pub const MERGED_VOLUME_FACTOR: f64 = 1.5;

/// Plane removal, clustering, then 4PCS on every size-compatible cluster.
/// Each coarse pose is refined by ICP against the whole scene, since plane
/// removal also strips the robot's lowest band; the lowest-rms refinement wins.
///
/// [`Error::SegmentationFailed`] is returned when nothing survives
/// segmentation, or when every size-compatible cluster is too voluminous to be
/// the robot alone.
pub fn segment_then_register<T: Real>(
    scene: &PointCloud<T>,
    model: &PointCloud<T>,
    plane_cfg: &PlaneRemovalConfig,
    cluster_cfg: &ClusterConfig,
    cfg: &FourPcsConfig,
    icp_cfg: &IcpConfig,
) -> Result<RegistrationResult<T>> {
    if scene.is_empty() || model.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let stripped = if scene.len() >= 3 {
        remove_planes(scene, plane_cfg)?.remaining
    } else {
        scene.clone()
    };
    if stripped.is_empty() {
        return Err(Error::SegmentationFailed(
            "no points left after plane removal".into(),
        ));
    }
    let clusters = euclidean_cluster(&stripped, cluster_cfg)?;
    let scene_tree = KdTree::build(scene.points())?;
    let m = upright_extent(model.points());
    let (m_diag, m_vol) = (m.norm(), m.x * m.y * m.z);

    let mut compatible = 0;
    let mut last_err = None;
    let mut best: Option<RegistrationResult<T>> = None;
    for (ci, cluster) in clusters.iter().enumerate() {
        let e = upright_extent(cluster.points());
        let ratio = e.norm() / m_diag;
        if ratio < DIAGONAL_WINDOW.0 || ratio > DIAGONAL_WINDOW.1 {
            continue;
        }
        compatible += 1;
        if e.x * e.y * e.z > MERGED_VOLUME_FACTOR * m_vol {
            debug!(
                "cluster {ci}: {} points, volume {:.3} vs model {:.3}, skipped as merged",
                cluster.len(),
                e.x * e.y * e.z,
                m_vol
            );
            continue;
        }
        let coarse = match register_4pcs(model, cluster, cfg) {
            Ok(c) => c,
            Err(err) => {
                debug!("cluster {ci}: 4PCS failed: {err}");
                last_err = Some(err);
                continue;
            }
        };
        match register_icp_tree(model, &scene_tree, &coarse.transform, icp_cfg) {
            Ok(r) => {
                debug!(
                    "cluster {ci}: lcp {:.3}, rms {:.2} mm",
                    coarse.lcp_score, r.rms_mm
                );
                if best.as_ref().is_none_or(|b| r.rms_mm < b.rms_mm) {
                    best = Some(r);
                }
            }
            Err(err) => last_err = Some(err),
        }
    }
    match (best, last_err) {
        (Some(r), _) => Ok(r),
        (None, Some(err)) => Err(err),
        (None, None) if compatible == 0 => Err(Error::SegmentationFailed(format!(
            "none of {} clusters matches the model size",
            clusters.len()
        ))),
        (None, None) => Err(Error::SegmentationFailed(
            "the robot could not be separated from nearby objects".into(),
        )),
    }
}
