use crate::error::Result;
use crate::geom::{Aabb, Point3, PointCloud, Vector3};
use crate::scalar::Real;

use super::descriptors::{
    global_signature, histogram_similarity, l2, local_histograms, DescriptorKind, DescriptorSet,
};
use super::DetectionConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxCandidate<T: Real = f64> {
    pub aabb: Aabb<T>,
    /// Scene indices inside the box, ascending.
    pub point_indices: Vec<usize>,
    pub match_score: f64,
    /// Scene keypoints behind the mutual matches; empty for global signatures.
    pub matched_keypoints: Vec<Point3<T>>,
    /// Position in the sliding grid, x fastest, then y, then z.
    pub grid_index: usize,
}

/// Boxes per axis so that the last one reaches the far side of the scene.
fn steps_along(extent: f64, side: f64, step: f64) -> usize {
    if extent <= side {
        1
    } else {
        ((extent - side) / step).ceil() as usize + 1
    }
}

/// Grid of model-sized boxes anchored at the scene minimum, stepping
/// `step_fraction` of each box side; boxes with fewer than `min_points`
/// points are dropped. In planar mode there is a single layer on the floor.
pub fn slide_boxes<T: Real>(
    scene: &PointCloud<T>,
    model_box: &Aabb<T>,
    cfg: &DetectionConfig,
) -> Vec<BoxCandidate<T>> {
    let Some(bounds) = scene.aabb() else {
        return Vec::new();
    };
    let side = model_box.extent();
    let extent = bounds.extent();
    let mut n = [1usize; 3];
    let mut step = [0.0f64; 3];
    for k in 0..3 {
        step[k] = cfg.step_fraction * side[k].as_f64();
        n[k] = if cfg.planar && k == 2 {
            1
        } else {
            steps_along(
                extent[k].as_f64(),
                side[k].as_f64(),
                step[k].max(f64::MIN_POSITIVE),
            )
        };
    }
    let pts = scene.points();
    let mut out = Vec::new();
    let mut grid_index = 0;
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let offset = Vector3::new(
                    T::lit(ix as f64 * step[0]),
                    T::lit(iy as f64 * step[1]),
                    T::lit(iz as f64 * step[2]),
                );
                let min = bounds.min + offset;
                let aabb = Aabb {
                    min,
                    max: min + side,
                };
                let inside: Vec<usize> =
                    (0..pts.len()).filter(|&i| aabb.contains(&pts[i])).collect();
                if inside.len() >= cfg.min_points {
                    out.push(BoxCandidate {
                        aabb,
                        point_indices: inside,
                        match_score: 0.0,
                        matched_keypoints: Vec::new(),
                        grid_index,
                    });
                }
                grid_index += 1;
            }
        }
    }
    out
}

/// Nearest model descriptor of every scene keypoint and whether that match
/// passes the ratio test against the second-nearest model descriptor.
fn scene_side_matches(
    dist: &[f64],
    n_scene: usize,
    n_model: usize,
    ratio: f64,
) -> (Vec<usize>, Vec<bool>) {
    (0..n_scene)
        .map(|c| {
            let (mut b1, mut d1, mut d2) = (0, f64::INFINITY, f64::INFINITY);
            for m in 0..n_model {
                let d = dist[m * n_scene + c];
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    b1 = m;
                } else if d < d2 {
                    d2 = d;
                }
            }
            (b1, d2.is_infinite() || d1 <= ratio * d2)
        })
        .unzip()
}

/// Scene keypoints in `cols` that are the nearest, for some model keypoint,
/// and pick that model keypoint back while passing the ratio test. One entry
/// per matched model keypoint, in model order.
fn mutual_matches(
    dist: &[f64],
    n_scene: usize,
    cols: &[usize],
    best: &[usize],
    passes: &[bool],
) -> Vec<usize> {
    if cols.is_empty() {
        return Vec::new();
    }
    let n_model = dist.len() / n_scene;
    (0..n_model)
        .filter_map(|m| {
            let row = &dist[m * n_scene..(m + 1) * n_scene];
            let c = *cols
                .iter()
                .min_by(|&&a, &&b| row[a].total_cmp(&row[b]).then(a.cmp(&b)))
                .expect("cols is non-empty");
            (best[c] == m && passes[c]).then_some(c)
        })
        .collect()
}

/// Scores every candidate against the model descriptors and sorts by score,
/// highest first, ties by grid index.
///
/// Local histograms of the scene are computed once over the whole scene, so a
/// keypoint near a box wall still sees its full neighbourhood; a box then owns
/// the keypoints inside it. The score is the number of mutual matches over the
/// number of model keypoints. The ratio test is taken on the scene side, among
/// model descriptors, so it does not depend on how many keypoints share a box.
/// Global signatures are computed per box and scored by histogram intersection.
pub fn score_candidates<T: Real>(
    mut candidates: Vec<BoxCandidate<T>>,
    scene: &PointCloud<T>,
    model_desc: &DescriptorSet<T>,
    cfg: &DetectionConfig,
) -> Result<Vec<BoxCandidate<T>>> {
    if candidates.is_empty() || model_desc.is_empty() {
        return Ok(candidates);
    }
    match cfg.descriptor {
        DescriptorKind::LocalHistogram => {
            let scene_desc = local_histograms(scene, cfg)?;
            let (nm, ns) = (model_desc.len(), scene_desc.len());
            let mut dist = vec![0.0; nm * ns];
            for m in 0..nm {
                let a = model_desc.descriptor(m);
                for s in 0..ns {
                    dist[m * ns + s] = l2(a, scene_desc.descriptor(s));
                }
            }
            let (best, passes) = scene_side_matches(&dist, ns, nm, cfg.match_ratio_max);
            let keys: Vec<Point3<T>> = scene_desc.keypoints.points().to_vec();
            for c in &mut candidates {
                let cols: Vec<usize> = (0..ns).filter(|&s| c.aabb.contains(&keys[s])).collect();
                let matched = mutual_matches(&dist, ns, &cols, &best, &passes);
                c.match_score = matched.len() as f64 / nm as f64;
                c.matched_keypoints = matched.iter().map(|&k| keys[k]).collect();
            }
        }
        DescriptorKind::GlobalSignature => {
            let reference = model_desc.descriptor(0);
            for c in &mut candidates {
                let sub = scene.select(&c.point_indices);
                c.match_score = match global_signature(&sub, model_desc.scale, cfg.rng_seed) {
                    Ok(d) => histogram_similarity(reference, d.descriptor(0)),
                    Err(_) => 0.0,
                };
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.match_score
            .total_cmp(&a.match_score)
            .then(a.grid_index.cmp(&b.grid_index))
    });
    Ok(candidates)
}
