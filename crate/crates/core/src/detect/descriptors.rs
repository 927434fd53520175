//! Keypoint descriptors: an FPFH-style local histogram and a whole-cloud
//! signature. Pair features use absolute cosines, so normal sign conventions
//! of the two clouds do not matter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, KdTree, Point3, PointCloud, Vector3};
use crate::preprocess::voxel_representatives;
use crate::scalar::Real;

use super::DetectionConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    LocalHistogram,
    GlobalSignature,
}

/// Bins per pair feature of the local histogram.
pub const LOCAL_BINS: usize = 11;
/// Length of a local histogram.
pub const LOCAL_DIM: usize = 3 * LOCAL_BINS;
/// Bins of each half of the global signature.
pub const GLOBAL_BINS: usize = 30;
const D2_PAIRS: usize = 4000;

#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSet<T: Real = f64> {
    pub keypoints: PointCloud<T>,
    /// Index of each keypoint in the source cloud; empty for global signatures.
    pub source_indices: Vec<usize>,
    pub dim: usize,
    /// Distance scale of global signatures, metres; zero for local histograms.
    pub scale: f64,
    data: Vec<f64>,
}

impl<T: Real> DescriptorSet<T> {
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `1 - L1/2` for two L1-normalised histograms, in `[0, 1]`.
pub fn histogram_similarity(a: &[f64], b: &[f64]) -> f64 {
    1.0 - 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn bin(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

fn normalize(h: &mut [f64]) {
    let s: f64 = h.iter().sum();
    if s > 0.0 {
        h.iter_mut().for_each(|v| *v /= s);
    }
}

/// Simplified point feature histogram of point `i` over `nbrs`.
fn spfh<T: Real>(
    pts: &[Point3<T>],
    normals: &[Vector3<T>],
    i: usize,
    nbrs: &[usize],
) -> [f64; LOCAL_DIM] {
    let mut h = [0.0; LOCAL_DIM];
    let ns = normals[i];
    for &j in nbrs {
        if j == i {
            continue;
        }
        let d = pts[j] - pts[i];
        let len = d.norm();
        if len <= T::zero() {
            continue;
        }
        let d = d / len;
        let nt = normals[j];
        let f1 = ns.dot(&nt).magnitude().as_f64();
        let a = ns.dot(&d).magnitude().as_f64();
        let b = nt.dot(&d).magnitude().as_f64();
        h[bin(f1, LOCAL_BINS)] += 1.0;
        h[LOCAL_BINS + bin(a.min(b), LOCAL_BINS)] += 1.0;
        h[2 * LOCAL_BINS + bin(a.max(b), LOCAL_BINS)] += 1.0;
    }
    normalize(&mut h);
    h
}

fn normals_of<T: Real>(cloud: &PointCloud<T>) -> Result<&[Vector3<T>]> {
    cloud
        .normals()
        .ok_or_else(|| Error::InvalidConfig("descriptors need a cloud with normals".into()))
}

/// Local histograms at voxel keypoints; see [`compute_descriptors`].
pub fn local_histograms<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &DetectionConfig,
) -> Result<DescriptorSet<T>> {
    if cloud.len() < 10 {
        return Err(Error::TooFewPoints {
            needed: 10,
            got: cloud.len(),
        });
    }
    let normals = normals_of(cloud)?;
    let pts = cloud.points();
    let tree = KdTree::build(pts)?;
    let r = T::lit(cfg.feature_radius);
    let keys = voxel_representatives(cloud, cfg.keypoint_voxel);

    // SPFH of every point that is a keypoint or lies near one
    let mut needed = vec![false; pts.len()];
    let mut key_nbrs = Vec::with_capacity(keys.len());
    for &k in &keys {
        let nb = tree.within_radius(&pts[k], r);
        for &(j, _) in &nb {
            needed[j] = true;
        }
        key_nbrs.push(nb);
    }
    let spfhs: Vec<Option<[f64; LOCAL_DIM]>> = (0..pts.len())
        .map(|i| {
            needed[i].then(|| {
                let nb: Vec<usize> = tree
                    .within_radius(&pts[i], r)
                    .into_iter()
                    .map(|(j, _)| j)
                    .collect();
                spfh(pts, normals, i, &nb)
            })
        })
        .collect();

    let mut data = Vec::with_capacity(keys.len() * LOCAL_DIM);
    for (&k, nb) in keys.iter().zip(&key_nbrs) {
        let own = spfhs[k].expect("keypoint histogram computed");
        let mut acc = [0.0; LOCAL_DIM];
        let mut wsum = 0.0;
        for &(j, d) in nb {
            if j == k {
                continue;
            }
            // closer neighbours weigh more; floor avoids blow-up on duplicates
            let w = 1.0 / d.as_f64().max(1e-3 * cfg.feature_radius);
            let s = spfhs[j].expect("neighbour histogram computed");
            for b in 0..LOCAL_DIM {
                acc[b] += w * s[b];
            }
            wsum += w;
        }
        let mut h = own;
        if wsum > 0.0 {
            for b in 0..LOCAL_DIM {
                h[b] += acc[b] / wsum;
            }
        }
        normalize(&mut h);
        data.extend_from_slice(&h);
    }
    let keypoints = cloud.select(&keys);
    Ok(DescriptorSet {
        keypoints,
        source_indices: keys,
        dim: LOCAL_DIM,
        scale: 0.0,
        data,
    })
}

/// One signature for the whole cloud: the histogram of |cos| between each
/// normal and the direction from the centroid, followed by the distribution
/// of distances between random point pairs (scaled by `scale`, metres).
pub fn global_signature<T: Real>(
    cloud: &PointCloud<T>,
    scale: f64,
    rng_seed: u64,
) -> Result<DescriptorSet<T>> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: cloud.len(),
        });
    }
    let normals = normals_of(cloud)?;
    let pts = cloud.points();
    let c = cloud.centroid().expect("non-empty");
    let mut h = vec![0.0; 2 * GLOBAL_BINS];
    let mut angles = 0.0;
    for (p, n) in pts.iter().zip(normals) {
        let d = p - c;
        let len = d.norm();
        if len > T::zero() {
            h[bin(n.dot(&(d / len)).magnitude().as_f64(), GLOBAL_BINS)] += 1.0;
            angles += 1.0;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut shape = vec![0.0; GLOBAL_BINS];
    for _ in 0..D2_PAIRS {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        shape[bin((pts[i] - pts[j]).norm().as_f64() / scale, GLOBAL_BINS)] += 1.0;
    }
    normalize(&mut shape);
    if angles > 0.0 {
        h[..GLOBAL_BINS].iter_mut().for_each(|v| *v /= angles);
    }
    // each half sums to one; halve so the whole vector is L1-normalised
    for (k, v) in shape.into_iter().enumerate() {
        h[GLOBAL_BINS + k] = v;
    }
    h.iter_mut().for_each(|v| *v *= 0.5);
    Ok(DescriptorSet {
        keypoints: PointCloud::from_points(vec![c]),
        source_indices: Vec::new(),
        dim: 2 * GLOBAL_BINS,
        scale,
        data: h,
    })
}

/// Scale used for the distance half of global signatures: the model diagonal.
pub fn signature_scale<T: Real>(model: &PointCloud<T>) -> f64 {
    model
        .aabb()
        .map(|b: Aabb<T>| b.diagonal().as_f64())
        .unwrap_or(1.0)
        .max(1e-9)
}

/// Descriptors of a cloud with normals, per `cfg.descriptor`.
///
/// Local histograms are taken at voxel keypoints (the input point nearest each
/// voxel centroid, so keypoints keep their normals). The global signature
/// scales pair distances by the cloud's own diagonal; detection uses the
/// model diagonal for both sides instead.
pub fn compute_descriptors<T: Real>(
    cloud: &PointCloud<T>,
    cfg: &DetectionConfig,
) -> Result<DescriptorSet<T>> {
    cfg.validate()?;
    match cfg.descriptor {
        DescriptorKind::LocalHistogram => local_histograms(cloud, cfg),
        DescriptorKind::GlobalSignature => {
            global_signature(cloud, signature_scale(cloud), cfg.rng_seed)
        }
    }
}
