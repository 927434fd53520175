//! Automatic detection: slide a model-sized box over the scene, score each
//! placement by descriptor matches, then localise with four-start ICP.

mod descriptors;
mod slidebox;

pub use descriptors::{
    compute_descriptors, global_signature, histogram_similarity, l2, local_histograms,
    signature_scale, DescriptorKind, DescriptorSet, GLOBAL_BINS, LOCAL_BINS, LOCAL_DIM,
};
pub use slidebox::{score_candidates, slide_boxes, BoxCandidate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, KdTree, Point3, PointCloud};
use crate::icp::{register_icp_4rot_detailed, IcpConfig, RegistrationResult};
use crate::preprocess::estimate_normals;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    /// Grid step as a fraction of each box side, (0, 1].
    pub step_fraction: f64,
    /// Boxes with fewer points are not scored.
    pub min_points: usize,
    pub descriptor: DescriptorKind,
    /// Keypoint voxel edge, metres.
    pub keypoint_voxel: f64,
    /// Nearest over second-nearest descriptor distance must not exceed this.
    pub match_ratio_max: f64,
    /// Neighbourhood radius of the local histograms, metres.
    pub feature_radius: f64,
    /// Neighbours used for normal estimation.
    pub normal_k: usize,
    /// Single layer of boxes on the scene floor instead of a 3D grid.
    pub planar: bool,
    /// Widen the model box to the square footprint swept by the model turning
    /// about the vertical through its box centre, so an arbitrarily rotated
    /// robot still fits.
    pub yaw_invariant_box: bool,
    pub rng_seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            step_fraction: 0.2,
            min_points: 3,
            descriptor: DescriptorKind::LocalHistogram,
            keypoint_voxel: 0.05,
            match_ratio_max: 0.8,
            feature_radius: 0.2,
            normal_k: 30,
            planar: false,
            yaw_invariant_box: true,
            rng_seed: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "step_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.min_points == 0 {
            return Err(Error::InvalidConfig("min_points must be >= 1".into()));
        }
        if !(self.keypoint_voxel > 0.0 && self.feature_radius > 0.0 && self.match_ratio_max > 0.0) {
            return Err(Error::InvalidConfig(
                "keypoint_voxel, feature_radius and match_ratio_max must be positive".into(),
            ));
        }
        if self.normal_k < 3 {
            return Err(Error::InvalidConfig("normal_k must be >= 3".into()));
        }
        Ok(())
    }
}

/// Box slid over the scene for `model`.
pub fn detection_box<T: Real>(model: &PointCloud<T>, yaw_invariant: bool) -> Option<Aabb<T>> {
    let b = model.aabb()?;
    if !yaw_invariant {
        return Some(b);
    }
    let c = b.center();
    let r = model
        .points()
        .iter()
        .map(|p| (p.x - c.x).hypot(p.y - c.y))
        .fold(T::zero(), |a, v| a.max(v));
    Some(Aabb {
        min: Point3::new(c.x - r, c.y - r, b.min.z),
        max: Point3::new(c.x + r, c.y + r, b.max.z),
    })
}

fn with_normals<T: Real>(cloud: &PointCloud<T>, k: usize) -> Result<PointCloud<T>> {
    if cloud.normals().is_some() {
        Ok(cloud.clone())
    } else {
        estimate_normals(cloud, k)
    }
}

#[derive(Debug)]
pub struct Detection<T: Real = f64> {
    pub result: RegistrationResult<T>,
    pub best_box: BoxCandidate<T>,
    /// Which of the four ICP yaw starts won.
    pub start_index: usize,
    pub candidates_scored: usize,
}

/// Scores all box placements and returns them, best first.
pub fn rank_boxes<T: Real>(
    scene: &PointCloud<T>,
    model: &PointCloud<T>,
    cfg: &DetectionConfig,
) -> Result<Vec<BoxCandidate<T>>> {
    cfg.validate()?;
    let model_box = detection_box(model, cfg.yaw_invariant_box).ok_or(Error::EmptyCloud)?;
    let candidates = slide_boxes(scene, &model_box, cfg);
    if candidates.is_empty() {
        return Err(Error::NoCandidateBox);
    }
    let scene_n = with_normals(scene, cfg.normal_k)?;
    let model_n = with_normals(model, cfg.normal_k)?;
    let model_desc = match cfg.descriptor {
        DescriptorKind::LocalHistogram => local_histograms(&model_n, cfg)?,
        DescriptorKind::GlobalSignature => {
            global_signature(&model_n, signature_scale(model), cfg.rng_seed)?
        }
    };
    score_candidates(candidates, &scene_n, &model_desc, cfg)
}

/// Where the four ICP starts are placed: the horizontal centroid of the
/// matched keypoints at the box's mid height, or the box centre when nothing
/// matched.
pub fn start_center<T: Real>(b: &BoxCandidate<T>) -> Point3<T> {
    let c = b.aabb.center();
    if b.matched_keypoints.is_empty() {
        return c;
    }
    let n = T::from_count(b.matched_keypoints.len());
    let (x, y) = b
        .matched_keypoints
        .iter()
        .fold((T::zero(), T::zero()), |(x, y), p| (x + p.x, y + p.y));
    Point3::new(x / n, y / n, c.z)
}

/// Best box by descriptor score, then four-start ICP about the matched
/// keypoints in it (see [`start_center`]).
pub fn detect_robot<T: Real>(
    scene: &PointCloud<T>,
    model: &PointCloud<T>,
    cfg: &DetectionConfig,
    icp_cfg: &IcpConfig,
) -> Result<Detection<T>> {
    if scene.is_empty() {
        return Err(Error::NoCandidateBox);
    }
    if model.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ranked = rank_boxes(scene, model, cfg)?;
    let candidates_scored = ranked.len();
    let best_box = ranked.into_iter().next().ok_or(Error::NoCandidateBox)?;
    let tree = KdTree::build(scene.points())?;
    let multi = register_icp_4rot_detailed(model, &tree, &start_center(&best_box), icp_cfg)?;
    Ok(Detection {
        result: multi.best,
        best_box,
        start_index: multi.start_index,
        candidates_scored,
    })
}
