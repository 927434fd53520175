//! Classic 4-point congruent sets with a brute-force pair band search.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{best_rigid_fit, Aabb, KdTree, Point3, PointCloud, RigidTransform};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FourPcsConfig {
    /// Expected fraction of the model visible in the cluster, (0, 1].
    pub overlap_estimate: f64,
    /// Congruence and LCP tolerance, metres.
    pub delta: f64,
    /// Points drawn from each cloud for base selection and pair search.
    pub sample_size: usize,
    pub max_bases: usize,
    pub rng_seed: u64,
}

impl Default for FourPcsConfig {
    fn default() -> Self {
        Self {
            overlap_estimate: 0.5,
            delta: 0.01,
            sample_size: 600,
            max_bases: 200,
            rng_seed: 0,
        }
    }
}

impl FourPcsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_estimate > 0.0 && self.overlap_estimate <= 1.0) {
            return Err(Error::InvalidConfig(
                "overlap_estimate must lie in (0, 1]".into(),
            ));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        if self.sample_size < 4 || self.max_bases == 0 {
            return Err(Error::InvalidConfig(
                "sample_size must be >= 4 and max_bases >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoarseResult<T: Real = f64> {
    /// Model frame to cluster frame.
    pub transform: RigidTransform<T>,
    /// Share of LCP probe points of the cluster within `delta` of the moved model.
    pub lcp_score: f64,
    pub bases_tried: usize,
}

/// Number of cluster points used to score candidates.
const LCP_POINTS: usize = 2000;
/// Probes checked before a candidate may be rejected by extrapolation.
const PREFIX: usize = 100;

/// A coplanar base `a b | c d` whose diagonals `ab` and `cd` cross at
/// `a + r1 (b - a) = c + r2 (d - c)`.
struct Base<T: Real> {
    pts: [Point3<T>; 4],
    r1: T,
    r2: T,
}

fn sample_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut v = shuffled_indices(n, m, seed);
    v.sort_unstable();
    v
}

fn shuffled_indices(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, n, m.min(n)).into_vec()
}

/// Parameters of the closest points of lines `a + s (b - a)` and `c + t (d - c)`.
fn line_params<T: Real>(
    a: &Point3<T>,
    b: &Point3<T>,
    c: &Point3<T>,
    d: &Point3<T>,
) -> Option<(T, T)> {
    let u = b - a;
    let v = d - c;
    let w = a - c;
    let (uu, uv, vv, uw, vw) = (u.dot(&u), u.dot(&v), v.dot(&v), u.dot(&w), v.dot(&w));
    let den = uu * vv - uv * uv;
    if den <= T::lit(1e-12) * uu * vv {
        return None;
    }
    Some(((uv * vw - vv * uw) / den, (uu * vw - uv * uw) / den))
}

fn pick_base<T: Real>(
    pts: &[Point3<T>],
    diameter: T,
    cfg: &FourPcsConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Base<T>> {
    let n = pts.len();
    let target = T::lit(cfg.overlap_estimate) * diameter;
    let delta = T::lit(cfg.delta);
    // three wide points whose sides stay below the overlap span
    let mut best: Option<([usize; 3], T)> = None;
    for _ in 0..64 {
        let s = index::sample(rng, n, 3);
        let (i, j, k) = (s.index(0), s.index(1), s.index(2));
        let (a, b, c) = (&pts[i], &pts[j], &pts[k]);
        let sides = [(a - b).norm(), (b - c).norm(), (a - c).norm()];
        if sides.iter().any(|&x| x > target) {
            continue;
        }
        let area = (b - a).cross(&(c - a)).norm();
        if best.as_ref().is_none_or(|(_, ba)| area > *ba) {
            best = Some(([i, j, k], area));
        }
    }
    let ([i, j, k], area) = best?;
    if area <= delta * delta {
        return None;
    }
    let (a, b, c) = (pts[i], pts[j], pts[k]);
    let normal = (b - a).cross(&(c - a)).normalize();
    // fourth point: coplanar, forming a convex quad, as far from the others as possible
    let mut fourth: Option<(Base<T>, T)> = None;
    let eps = T::lit(0.1);
    for (m, d) in pts.iter().enumerate() {
        if m == i || m == j || m == k || normal.dot(&(d - a)).magnitude() > delta {
            continue;
        }
        let spread = (d - a).norm().min((d - b).norm()).min((d - c).norm());
        if spread < T::lit(4.0) * delta
            || (d - a).norm().max((d - b).norm()).max((d - c).norm()) > target
        {
            continue;
        }
        for quad in [[a, b, c, *d], [a, c, b, *d], [a, *d, b, c]] {
            let Some((r1, r2)) = line_params(&quad[0], &quad[1], &quad[2], &quad[3]) else {
                continue;
            };
            if r1 > eps && r1 < T::one() - eps && r2 > eps && r2 < T::one() - eps {
                if fourth.as_ref().is_none_or(|(_, s)| spread > *s) {
                    fourth = Some((Base { pts: quad, r1, r2 }, spread));
                }
                break;
            }
        }
    }
    fourth.map(|(b, _)| b)
}

/// Ordered index pairs whose distance lies in `[d - delta, d + delta]`.
fn pairs_in_band<T: Real>(pts: &[Point3<T>], d: T, delta: T) -> Vec<(usize, usize)> {
    let lo = (d - delta).max(T::zero());
    let (lo2, hi2) = (lo * lo, (d + delta) * (d + delta));
    let mut out = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d2 = (pts[i] - pts[j]).norm_squared();
            if d2 >= lo2 && d2 <= hi2 {
                out.push((i, j));
                out.push((j, i));
            }
        }
    }
    out
}

struct Scorer<'a, T: Real> {
    model: &'a KdTree<T>,
    probes: Vec<Point3<T>>,
    delta2: T,
}

impl<T: Real> Scorer<'_, T> {
    /// Count of probes within delta of the model moved by `t`, or `None` once
    /// `to_beat` is out of reach.
    ///
    /// Probes are in random order, so a short prefix that scores far below the
    /// current best rejects the candidate early.
    fn count(&self, t: &RigidTransform<T>, to_beat: usize) -> Option<usize> {
        let inv = t.inverse();
        let n = self.probes.len();
        let head = PREFIX.min(n);
        if to_beat > 0 && n > PREFIX {
            let hits = self.probes[..head]
                .iter()
                .filter(|p| self.model.nearest_sq(&inv.apply_point(p)).1 <= self.delta2)
                .count();
            if (hits as f64) < 0.6 * to_beat as f64 * head as f64 / n as f64 {
                return None;
            }
        }
        let mut hits = 0;
        for (seen, p) in self.probes.iter().enumerate() {
            if self.model.nearest_sq(&inv.apply_point(p)).1 <= self.delta2 {
                hits += 1;
            }
            if hits + (n - seen - 1) <= to_beat {
                return None;
            }
        }
        Some(hits)
    }
}

/// Coarse model-to-cluster alignment by 4-point congruent sets.
///
/// Bases are drawn from the model sample; congruent quadruples are searched in
/// the cluster sample through the two diagonal-intersection ratios. Each
/// candidate is scored by its largest-common-pointset fraction and the best
/// one is returned. Stops early once the score reaches `overlap_estimate`.
pub fn register_4pcs<T: Real>(
    model: &PointCloud<T>,
    cluster: &PointCloud<T>,
    cfg: &FourPcsConfig,
) -> Result<CoarseResult<T>> {
    cfg.validate()?;
    for c in [model, cluster] {
        if c.len() < 4 {
            return Err(Error::TooFewPoints {
                needed: 4,
                got: c.len(),
            });
        }
    }
    let delta = T::lit(cfg.delta);
    let p: Vec<Point3<T>> = sample_indices(model.len(), cfg.sample_size, cfg.rng_seed)
        .into_iter()
        .map(|i| model.points()[i])
        .collect();
    let q: Vec<Point3<T>> = sample_indices(cluster.len(), cfg.sample_size, cfg.rng_seed)
        .into_iter()
        .map(|i| cluster.points()[i])
        .collect();
    let diameter = Aabb::from_points(&p)
        .map(|b| b.diagonal())
        .unwrap_or_else(T::zero);
    let model_tree = KdTree::build(model.points())?;
    let scorer = Scorer {
        model: &model_tree,
        probes: shuffled_indices(cluster.len(), LCP_POINTS, cfg.rng_seed ^ 0x9e37_79b9)
            .into_iter()
            .map(|i| cluster.points()[i])
            .collect(),
        delta2: delta * delta,
    };
    let probes = scorer.probes.len();
    let stop_at = (cfg.overlap_estimate * probes as f64).ceil() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(1));
    let mut best: Option<(RigidTransform<T>, usize)> = None;
    let mut tried = 0;
    let two = T::lit(2.0);

    for _ in 0..cfg.max_bases {
        tried += 1;
        let Some(base) = pick_base(&p, diameter, cfg, &mut rng) else {
            continue;
        };
        let [a, b, c, d] = base.pts;
        let (d1, d2) = ((b - a).norm(), (d - c).norm());
        let set1 = pairs_in_band(&q, d1, delta);
        let set2 = pairs_in_band(&q, d2, delta);
        if set1.is_empty() || set2.is_empty() {
            continue;
        }
        let mids: Vec<Point3<T>> = set1
            .iter()
            .map(|&(i, j)| q[i] + (q[j] - q[i]) * base.r1)
            .collect();
        let Ok(mid_tree) = KdTree::build(&mids) else {
            continue;
        };
        let cos_base = (b - a).normalize().dot(&(d - c).normalize());
        let dists = [
            (a - c).norm(),
            (a - d).norm(),
            (b - c).norm(),
            (b - d).norm(),
        ];
        let src = [a, b, c, d];
        for &(k, l) in &set2 {
            let e = q[k] + (q[l] - q[k]) * base.r2;
            for (m, _) in mid_tree.within_radius(&e, delta) {
                let (i, j) = set1[m];
                if i == k || i == l || j == k || j == l {
                    continue;
                }
                let (qi, qj, qk, ql) = (q[i], q[j], q[k], q[l]);
                let cos_q = (qj - qi).normalize().dot(&(ql - qk).normalize());
                if (cos_q - cos_base).magnitude() > T::lit(0.1) {
                    continue;
                }
                let got = [
                    (qi - qk).norm(),
                    (qi - ql).norm(),
                    (qj - qk).norm(),
                    (qj - ql).norm(),
                ];
                if dists
                    .iter()
                    .zip(&got)
                    .any(|(x, y)| (*x - *y).magnitude() > two * delta)
                {
                    continue;
                }
                let dst = [qi, qj, qk, ql];
                let Some(t) = best_rigid_fit(&src, &dst) else {
                    continue;
                };
                let resid = src
                    .iter()
                    .zip(&dst)
                    .map(|(s, d)| (t.apply_point(s) - d).norm_squared())
                    .fold(T::zero(), |x, y| x + y);
                if resid > T::lit(4.0) * delta * delta {
                    continue;
                }
                let to_beat = best.as_ref().map_or(0, |b| b.1);
                if let Some(hits) = scorer.count(&t, to_beat) {
                    if hits > to_beat {
                        best = Some((t, hits));
                    }
                }
            }
        }
        if best.as_ref().is_some_and(|b| b.1 >= stop_at) {
            break;
        }
    }

    let score = |hits: usize| hits as f64 / probes as f64;
    match best {
        Some((t, hits)) if score(hits) >= cfg.overlap_estimate / 2.0 => Ok(CoarseResult {
            transform: t,
            lcp_score: score(hits),
            bases_tried: tried,
        }),
        other => Err(Error::NoCongruentBase {
            best_score: other.map_or(0.0, |b| score(b.1)),
        }),
    }
}

/// LCP fraction of `cluster` points within `delta` of `model` moved by `t`,
/// over the same probe subset [`register_4pcs`] uses.
pub fn lcp_score<T: Real>(
    model: &PointCloud<T>,
    cluster: &PointCloud<T>,
    t: &RigidTransform<T>,
    delta: f64,
    rng_seed: u64,
) -> Result<f64> {
    let tree = KdTree::build(model.points())?;
    let scorer = Scorer {
        model: &tree,
        probes: shuffled_indices(cluster.len(), LCP_POINTS, rng_seed ^ 0x9e37_79b9)
            .into_iter()
            .map(|i| cluster.points()[i])
            .collect(),
        delta2: T::lit(delta) * T::lit(delta),
    };
    if scorer.probes.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(scorer.count(t, 0).unwrap_or(0) as f64 / scorer.probes.len() as f64)
}
