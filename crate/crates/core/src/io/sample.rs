use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

use super::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub sample_count: usize,
    pub rng_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            sample_count: 16_000,
            rng_seed: 0,
        }
    }
}

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_mesh(mesh: &TriangleMesh, cfg: &SamplingConfig) -> Result<PointCloud> {
    sample_mesh_labeled(mesh, cfg).map(|(c, _)| c)
}

/// Like [`sample_mesh`], also returning the source triangle of every sample.
pub fn sample_mesh_labeled(
    mesh: &TriangleMesh,
    cfg: &SamplingConfig,
) -> Result<(PointCloud, Vec<usize>)> {
    if cfg.sample_count == 0 {
        return Err(Error::InvalidConfig(
            "sample_count must be at least 1".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for i in 0..mesh.triangles.len() {
        let a = mesh.triangle_area(i);
        if a.is_finite() {
            total += a;
        }
        cumulative.push(total);
    }
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut points = Vec::with_capacity(cfg.sample_count);
    let mut labels = Vec::with_capacity(cfg.sample_count);
    for _ in 0..cfg.sample_count {
        let u: f64 = rng.random::<f64>() * total;
        let tri = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangle(tri);
        let s = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
        points.push(Point3::from(p));
        labels.push(tri);
    }
    Ok((PointCloud::from_points(points), labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn unit_square() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    /// Distance from `p` to the triangle's plane plus how far outside the
    /// barycentric simplex it falls.
    fn barycentric_residual(p: &Point3, tri: [Point3; 3]) -> f64 {
        let [a, b, c] = tri;
        let v0 = b - a;
        let v1 = c - a;
        let v2 = p - a;
        let n = v0.cross(&v1);
        let plane = (v2.dot(&n) / n.norm()).abs();
        let (d00, d01, d11) = (v0.dot(&v0), v0.dot(&v1), v1.dot(&v1));
        let (d20, d21) = (v2.dot(&v0), v2.dot(&v1));
        let denom = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / denom;
        let w = (d00 * d21 - d01 * d20) / denom;
        let u = 1.0 - v - w;
        let outside = [u, v, w].iter().map(|x| (-x).max(0.0)).sum::<f64>();
        plane + outside
    }

    #[test]
    fn single_triangle_samples_stay_inside() {
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 1.0),
                Point3::new(0.0, 3.0, -1.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let c = sample_mesh(
            &mesh,
            &SamplingConfig {
                sample_count: 10,
                rng_seed: 7,
            },
        )
        .unwrap();
        assert_eq!(c.len(), 10);
        for p in c.points() {
            assert!(barycentric_residual(p, mesh.triangle(0)) < 1e-9);
        }
    }

    #[test]
    fn area_ratio_three_to_one() {
        // triangle areas 1.5 and 0.5
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(3.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(11.0, 0.0, 0.0),
                Point3::new(10.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let (_, labels) = sample_mesh_labeled(
            &mesh,
            &SamplingConfig {
                sample_count: 40_000,
                rng_seed: 1,
            },
        )
        .unwrap();
        let big = labels.iter().filter(|&&l| l == 0).count() as f64;
        // binomial: mean 30000, sd sqrt(40000 * 0.75 * 0.25)
        let sd = (40_000.0f64 * 0.75 * 0.25).sqrt();
        assert!((big - 30_000.0).abs() <= 3.0 * sd, "{big}");
    }

    #[test]
    fn unit_square_mean_is_centre() {
        let c = sample_mesh(
            &unit_square(),
            &SamplingConfig {
                sample_count: 16_000,
                rng_seed: 3,
            },
        )
        .unwrap();
        let m = c.centroid().unwrap();
        assert!(
            (m.x - 0.5).abs() < 0.01 && (m.y - 0.5).abs() < 0.01,
            "{m:?}"
        );
    }

    #[test]
    fn zero_area_triangles_are_never_chosen() {
        let mut mesh = unit_square();
        mesh.vertices.push(Point3::new(5.0, 5.0, 5.0));
        mesh.triangles.insert(1, [4, 4, 4]);
        let (_, labels) = sample_mesh_labeled(
            &mesh,
            &SamplingConfig {
                sample_count: 5000,
                rng_seed: 2,
            },
        )
        .unwrap();
        assert!(labels.iter().all(|&l| l != 1));
    }

    #[test]
    fn degenerate_mesh_is_rejected() {
        let mesh = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            sample_mesh(
                &mesh,
                &SamplingConfig {
                    sample_count: 3,
                    rng_seed: 0
                }
            ),
            Err(Error::DegenerateMesh)
        ));
    }

    #[test]
    fn same_seed_same_bits() {
        let cfg = SamplingConfig {
            sample_count: 1000,
            rng_seed: 99,
        };
        assert_eq!(
            sample_mesh(&unit_square(), &cfg).unwrap(),
            sample_mesh(&unit_square(), &cfg).unwrap()
        );
    }

    #[test]
    fn chi_square_area_density_over_ten_seeds() {
        // fan of triangles with unequal areas
        let mut vertices = vec![Point3::new(0.0, 0.0, 0.0)];
        let mut triangles = Vec::new();
        for k in 0..9u32 {
            vertices.push(Point3::new(1.0 + k as f64 * 0.3, 0.0, 0.0));
            vertices.push(Point3::new(0.0, 1.0, 0.2 * k as f64));
            triangles.push([0, 1 + 2 * k, 2 + 2 * k]);
        }
        let mesh = TriangleMesh::new(vertices, triangles).unwrap();
        let total = mesh.total_area();
        let n = 20_000;
        let dist = ChiSquared::new((mesh.triangles.len() - 1) as f64).unwrap();
        for seed in 0..10 {
            let (c, labels) = sample_mesh_labeled(
                &mesh,
                &SamplingConfig {
                    sample_count: n,
                    rng_seed: seed,
                },
            )
            .unwrap();
            let mut counts = vec![0usize; mesh.triangles.len()];
            for (p, &l) in c.points().iter().zip(&labels) {
                assert!(barycentric_residual(p, mesh.triangle(l)) < 1e-9);
                counts[l] += 1;
            }
            let stat: f64 = counts
                .iter()
                .enumerate()
                .map(|(i, &o)| {
                    let e = n as f64 * mesh.triangle_area(i) / total;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            let p = 1.0 - dist.cdf(stat);
            assert!(p > 0.01, "seed {seed}: chi2 {stat}, p {p}");
        }
    }
}
