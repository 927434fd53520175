use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Matrix3, Point3, PointCloud, RigidTransform, Vector3};
use crate::io::{load_mesh, sample_mesh, sample_mesh_labeled, SamplingConfig, TriangleMesh};

use super::primitives::{box_mesh, cylinder_mesh, plane_mesh};
use super::robot::robot_mesh;

/// Pose in a scene file: a translation plus either a yaw in degrees or a full
/// row-major rotation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
}

impl PoseSpec {
    pub fn from_yaw(translation: [f64; 3], yaw_deg: f64) -> Self {
        Self {
            translation,
            yaw_deg: Some(yaw_deg),
            rotation: None,
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform> {
        let t = Vector3::from(self.translation);
        match (self.yaw_deg, self.rotation) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig(
                "pose has both yaw_deg and rotation".into(),
            )),
            (Some(y), None) => Ok(RigidTransform::from_yaw(y.to_radians(), t)),
            (None, None) => Ok(RigidTransform::from_translation(t)),
            (None, Some(r)) => {
                let m = Matrix3::from_fn(|i, j| r[i][j]);
                let out = RigidTransform::new(m, t);
                if out.is_proper(1e-6) {
                    Ok(out)
                } else {
                    Err(Error::InvalidConfig(
                        "pose rotation is not a proper rotation matrix".into(),
                    ))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    /// `size = [x, y, z]`, centred on the pose.
    Box,
    /// `size = [x, y]`, in the pose's xy-plane.
    Plane,
    /// `size = [radius, height]`, standing on the pose origin.
    Cylinder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clutter {
    pub kind: PrimitiveKind,
    pub size: Vec<f64>,
    pub pose: PoseSpec,
}

impl Clutter {
    pub fn new(kind: PrimitiveKind, size: &[f64], pose: PoseSpec) -> Self {
        Self {
            kind,
            size: size.to_vec(),
            pose,
        }
    }

    pub fn mesh(&self) -> Result<TriangleMesh> {
        let need = match self.kind {
            PrimitiveKind::Box => 3,
            PrimitiveKind::Plane | PrimitiveKind::Cylinder => 2,
        };
        if self.size.len() != need || self.size.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "{:?} needs {need} positive sizes, got {:?}",
                self.kind, self.size
            )));
        }
        let s = &self.size;
        let local = match self.kind {
            PrimitiveKind::Box => box_mesh([s[0], s[1], s[2]]),
            PrimitiveKind::Plane => plane_mesh(s[0], s[1]),
            PrimitiveKind::Cylinder => cylinder_mesh(s[0], s[1]),
        };
        Ok(local.transformed(&self.pose.to_transform()?))
    }
}

/// A synthetic scene ready for sampling.
#[derive(Clone, Debug)]
pub struct SceneSpec {
    pub robot_mesh: TriangleMesh,
    /// Robot base frame to scene frame; the ground truth.
    pub robot_pose: RigidTransform,
    pub clutter: Vec<Clutter>,
    /// Metres, per coordinate.
    pub noise_sigma: f64,
    pub samples_total: usize,
    pub rng_seed: u64,
}

/// Default noise level, metres.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.005;
/// Samples per scene in the small configuration.
pub const SMALL_SAMPLES: usize = 16_000;
/// Samples per scene in the big configuration.
pub const BIG_SAMPLES: usize = 256_000;

impl SceneSpec {
    pub fn new(robot_pose: RigidTransform, clutter: Vec<Clutter>, rng_seed: u64) -> Self {
        Self {
            robot_mesh: robot_mesh(),
            robot_pose,
            clutter,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            samples_total: SMALL_SAMPLES,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if self.samples_total == 0 {
            return Err(Error::InvalidConfig("samples_total must be >= 1".into()));
        }
        Ok(())
    }

    /// Every surface in scene coordinates with the index of the first triangle
    /// of each surface; surface 0 is the robot.
    pub fn merged_mesh(&self) -> Result<(TriangleMesh, Vec<usize>)> {
        let mut mesh = self.robot_mesh.transformed(&self.robot_pose);
        let mut starts = vec![0];
        for c in &self.clutter {
            starts.push(mesh.triangles.len());
            mesh.append(&c.mesh()?);
        }
        Ok((mesh, starts))
    }
}

#[derive(Clone, Debug)]
pub struct SynthScene {
    pub scene: PointCloud,
    pub truth: RigidTransform,
    /// Surface of every point: 0 for the robot, `i + 1` for `clutter[i]`.
    pub labels: Vec<usize>,
}

impl SynthScene {
    /// Indices of points sampled from the robot.
    pub fn robot_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Samples all surfaces as one area-weighted mesh and adds Gaussian noise.
pub fn synthesize_scene(spec: &SceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let (mesh, starts) = spec.merged_mesh()?;
    let (cloud, tris) = sample_mesh_labeled(
        &mesh,
        &SamplingConfig {
            sample_count: spec.samples_total,
            rng_seed: spec.rng_seed,
        },
    )?;
    let labels = tris
        .iter()
        .map(|&t| starts.partition_point(|&s| s <= t) - 1)
        .collect();
    let mut points = cloud.into_points();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ 0x6e6f_6973_65);
        let normal =
            Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for p in &mut points {
            for k in 0..3 {
                p[k] += normal.sample(&mut rng);
            }
        }
    }
    Ok(SynthScene {
        scene: PointCloud::from_points(points),
        truth: spec.robot_pose,
        labels,
    })
}

/// Noise-free sample of the robot in its own frame.
pub fn model_cloud(mesh: &TriangleMesh, points: usize, rng_seed: u64) -> Result<PointCloud> {
    sample_mesh(
        mesh,
        &SamplingConfig {
            sample_count: points,
            rng_seed,
        },
    )
}

/// On-disk form of [`SceneSpec`].
///
/// ```toml
/// robot = "builtin"          # or a path to a PLY mesh, relative to the file
/// noise_sigma = 0.005
/// samples_total = 16000
/// rng_seed = 7
///
/// [robot_pose]
/// translation = [0.2, -0.1, 0.0]
/// yaw_deg = 35.0
///
/// [[clutter]]
/// kind = "plane"
/// size = [1.8, 1.8]
/// pose = { translation = [0.0, 0.0, 0.0] }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default = "builtin")]
    pub robot: String,
    pub robot_pose: PoseSpec,
    #[serde(default)]
    pub clutter: Vec<Clutter>,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_samples")]
    pub samples_total: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

fn builtin() -> String {
    "builtin".into()
}
fn default_sigma() -> f64 {
    DEFAULT_NOISE_SIGMA
}
fn default_samples() -> usize {
    SMALL_SAMPLES
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("scene file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, dir))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene files always serialize")
    }

    /// Robot meshes given as relative paths are looked up under `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<SceneSpec> {
        let robot_mesh = if self.robot == "builtin" {
            robot_mesh()
        } else {
            load_mesh(base_dir.join(&self.robot))?
        };
        Ok(SceneSpec {
            robot_mesh,
            robot_pose: self.robot_pose.to_transform()?,
            clutter: self.clutter.clone(),
            noise_sigma: self.noise_sigma,
            samples_total: self.samples_total,
            rng_seed: self.rng_seed,
        })
    }
}

/// Floor square of side `side` centred under `center`.
fn floor(center: [f64; 2], side: f64) -> Clutter {
    Clutter::new(
        PrimitiveKind::Plane,
        &[side, side],
        PoseSpec::from_yaw([center[0], center[1], 0.0], 0.0),
    )
}

/// A closed cabinet standing on the floor; its lid is the table top.
fn cabinet(center: [f64; 2], size: [f64; 3], yaw_deg: f64) -> Clutter {
    Clutter::new(
        PrimitiveKind::Box,
        &size,
        PoseSpec::from_yaw([center[0], center[1], size[2] / 2.0], yaw_deg),
    )
}

fn around(yaw: f64, dist: f64, origin: [f64; 2]) -> [f64; 2] {
    [origin[0] + dist * yaw.cos(), origin[1] + dist * yaw.sin()]
}

/// Robot on a floor patch with a cabinet table and a few objects, all placed
/// from `seed`. The robot yaw is uniform over the full circle.
pub fn cluttered_cell(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yaw = rng.random_range(-180.0..180.0f64);
    let base = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
    let pose = RigidTransform::from_yaw(yaw.to_radians(), Vector3::new(base[0], base[1], 0.0));
    // the table sits behind the robot, the small objects to its sides
    let back = yaw.to_radians() + std::f64::consts::PI + rng.random_range(-0.6..0.6);
    let mut clutter = vec![
        floor(base, 1.6),
        cabinet(
            around(back, 0.7, base),
            [0.5, 0.4, 0.55],
            rng.random_range(0.0..90.0),
        ),
    ];
    let side = yaw.to_radians()
        + std::f64::consts::FRAC_PI_2 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let c = around(side + rng.random_range(-0.4..0.4), 0.85, base);
    clutter.push(cabinet(c, [0.25, 0.25, 0.3], rng.random_range(0.0..90.0)));
    let c = around(
        side + std::f64::consts::PI + rng.random_range(-0.4..0.4),
        0.8,
        base,
    );
    clutter.push(Clutter::new(
        PrimitiveKind::Cylinder,
        &[0.1, 0.4],
        PoseSpec::from_yaw([c[0], c[1], 0.0], 0.0),
    ));
    SceneSpec::new(pose, clutter, seed)
}

/// Robot alone on a floor patch with one distant box.
pub fn isolated_robot(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yaw = rng.random_range(-180.0..180.0f64);
    let pose = RigidTransform::from_yaw(yaw.to_radians(), Vector3::zeros());
    let far = around(yaw.to_radians() + std::f64::consts::PI, 1.0, [0.0, 0.0]);
    let clutter = vec![floor([0.0, 0.0], 2.0), cabinet(far, [0.2, 0.2, 0.2], 20.0)];
    SceneSpec::new(pose, clutter, seed)
}

/// Robot base pressed against the side of a cabinet table, so the two form
/// one connected surface once the floor is gone.
pub fn robot_flush_against_table(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yaw = rng.random_range(-180.0..180.0f64).to_radians();
    let pose = RigidTransform::from_yaw(yaw, Vector3::zeros());
    // to the robot's left, touching the base cylinder (radius 0.18)
    let size = [1.0, 0.6, 0.7];
    let left = yaw + std::f64::consts::FRAC_PI_2;
    let c = around(left, 0.18 + size[1] / 2.0, [0.0, 0.0]);
    let clutter = vec![floor([0.0, 0.0], 2.0), cabinet(c, size, yaw.to_degrees())];
    SceneSpec::new(pose, clutter, seed)
}

/// Area-weighted centroid of the posed robot surface.
pub fn robot_centroid(spec: &SceneSpec) -> Point3 {
    let m = spec.robot_mesh.transformed(&spec.robot_pose);
    let mut sum = Vector3::zeros();
    let mut area = 0.0;
    for i in 0..m.triangles.len() {
        let [a, b, c] = m.triangle(i);
        let w = m.triangle_area(i);
        sum += (a.coords + b.coords + c.coords) * (w / 3.0);
        area += w;
    }
    Point3::from(sum / area)
}
