use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stats::{summarize, SummaryRow};
use crate::coarse::{segment_then_register, FourPcsConfig};
use crate::detect::{detect_robot, DetectionConfig};
use crate::error::{Error, Result};
use crate::geom::{apply_transform, rms_closest_point_mm, KdTree, PointCloud, RigidTransform};
use crate::icp::{register_icp, seed_to_transform, IcpConfig, RegistrationResult};
use crate::preprocess::{
    mls_smooth, sphere_crop, ClusterConfig, CropConfig, MlsConfig, PlaneRemovalConfig, Upsampling,
};
use crate::synth::{
    cluttered_cell, isolated_robot, model_cloud, robot_flush_against_table, simulate_user_guess,
    synthesize_scene, SceneFile, SceneSpec, BIG_SAMPLES, SMALL_SAMPLES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Icp,
    Fourpcs,
    Slidebox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSize {
    Small,
    Big,
}

impl CloudSize {
    pub fn samples(self) -> usize {
        match self {
            CloudSize::Small => SMALL_SAMPLES,
            CloudSize::Big => BIG_SAMPLES,
        }
    }
}

/// Scene resampling applied before registration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlsMethod {
    /// No smoothing at all.
    Off,
    /// MLS projection without upsampling.
    Mls,
    /// MLS with voxel-grid dilation upsampling.
    VoxelGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ClutteredCell,
    IsolatedRobot,
    RobotFlushAgainstTable,
}

impl Preset {
    pub fn build(self, seed: u64) -> SceneSpec {
        match self {
            Preset::ClutteredCell => cluttered_cell(seed),
            Preset::IsolatedRobot => isolated_robot(seed),
            Preset::RobotFlushAgainstTable => robot_flush_against_table(seed),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Preset::ClutteredCell => "cluttered_cell",
            Preset::IsolatedRobot => "isolated_robot",
            Preset::RobotFlushAgainstTable => "robot_flush_against_table",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SceneRef {
    File { file: PathBuf },
    Preset { preset: Preset, seed: u64 },
}

impl SceneRef {
    pub fn label(&self) -> String {
        match self {
            SceneRef::File { file } => file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| file.display().to_string()),
            SceneRef::Preset { preset, seed } => format!("{}#{seed}", preset.name()),
        }
    }

    pub fn resolve(&self) -> Result<SceneSpec> {
        match self {
            SceneRef::File { file } => {
                let (f, dir) = SceneFile::load(file)?;
                f.resolve(&dir)
            }
            SceneRef::Preset { preset, seed } => Ok(preset.build(*seed)),
        }
    }
}

/// Lists of values per configuration field; rows are their Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamGrid {
    pub max_correspondence_distance: Vec<f64>,
    pub max_iterations: Vec<usize>,
    pub mls_method: Vec<MlsMethod>,
    pub mls_radius: Vec<f64>,
    pub mls_param: Vec<f64>,
    pub overlap: Vec<f64>,
    pub delta: Vec<f64>,
    pub step_fraction: Vec<f64>,
    pub min_points: Vec<usize>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        let icp = IcpConfig::default();
        let mls = MlsConfig::default();
        let fp = FourPcsConfig::default();
        let det = DetectionConfig::default();
        Self {
            max_correspondence_distance: vec![icp.max_correspondence_distance],
            max_iterations: vec![icp.max_iterations],
            mls_method: vec![MlsMethod::Off],
            mls_radius: vec![mls.search_radius],
            mls_param: vec![mls.upsample_param],
            overlap: vec![fp.overlap_estimate],
            delta: vec![fp.delta],
            step_fraction: vec![det.step_fraction],
            min_points: vec![det.min_points],
        }
    }
}

/// One parameter combination. Fields that do not apply to the algorithm or
/// MLS method are `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSet {
    pub max_correspondence_distance: f64,
    pub max_iterations: usize,
    pub mls_method: MlsMethod,
    pub mls_radius: Option<f64>,
    pub mls_param: Option<f64>,
    pub overlap: Option<f64>,
    pub delta: Option<f64>,
    pub step_fraction: Option<f64>,
    pub min_points: Option<usize>,
}

impl ParamGrid {
    fn check(&self) -> Result<()> {
        let empty = [
            (
                "max_correspondence_distance",
                self.max_correspondence_distance.is_empty(),
            ),
            ("max_iterations", self.max_iterations.is_empty()),
            ("mls_method", self.mls_method.is_empty()),
            ("mls_radius", self.mls_radius.is_empty()),
            ("mls_param", self.mls_param.is_empty()),
            ("overlap", self.overlap.is_empty()),
            ("delta", self.delta.is_empty()),
            ("step_fraction", self.step_fraction.is_empty()),
            ("min_points", self.min_points.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((name, _)) => Err(Error::InvalidConfig(format!(
                "sweep grid `{name}` is empty"
            ))),
            None => Ok(()),
        }
    }

    /// MLS settings, with radius and voxel size collapsed where unused.
    fn mls_combos(&self) -> Vec<(MlsMethod, Option<f64>, Option<f64>)> {
        let mut out = Vec::new();
        for &m in &self.mls_method {
            match m {
                MlsMethod::Off => out.push((m, None, None)),
                MlsMethod::Mls => out.extend(self.mls_radius.iter().map(|&r| (m, Some(r), None))),
                MlsMethod::VoxelGrid => {
                    for &r in &self.mls_radius {
                        out.extend(self.mls_param.iter().map(|&p| (m, Some(r), Some(p))));
                    }
                }
            }
        }
        let mut uniq: Vec<(MlsMethod, Option<f64>, Option<f64>)> = Vec::new();
        for c in out {
            if !uniq.contains(&c) {
                uniq.push(c);
            }
        }
        uniq
    }

    /// Cartesian product in a fixed order: ICP fields, algorithm fields, MLS.
    pub fn combinations(&self, algorithm: Algorithm) -> Vec<ParamSet> {
        let extra: Vec<(Option<f64>, Option<f64>, Option<f64>, Option<usize>)> = match algorithm {
            Algorithm::Icp => vec![(None, None, None, None)],
            Algorithm::Fourpcs => self
                .overlap
                .iter()
                .flat_map(|&o| {
                    self.delta
                        .iter()
                        .map(move |&d| (Some(o), Some(d), None, None))
                })
                .collect(),
            Algorithm::Slidebox => self
                .step_fraction
                .iter()
                .flat_map(|&s| {
                    self.min_points
                        .iter()
                        .map(move |&m| (None, None, Some(s), Some(m)))
                })
                .collect(),
        };
        let mls = self.mls_combos();
        let mut out = Vec::new();
        for &d in &self.max_correspondence_distance {
            for &it in &self.max_iterations {
                for &(overlap, delta, step_fraction, min_points) in &extra {
                    for &(mls_method, mls_radius, mls_param) in &mls {
                        out.push(ParamSet {
                            max_correspondence_distance: d,
                            max_iterations: it,
                            mls_method,
                            mls_radius,
                            mls_param,
                            overlap,
                            delta,
                            step_fraction,
                            min_points,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Simulated user seed for seeded algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuessConfig {
    /// Metres, per axis.
    pub sigma_pos: f64,
    pub sigma_yaw_deg: f64,
}

impl Default for GuessConfig {
    fn default() -> Self {
        Self {
            sigma_pos: 0.1,
            sigma_yaw_deg: 20.0,
        }
    }
}

/// Sweep description, usually read from TOML:
///
/// ```toml
/// algorithm = "icp"
/// cloud_size = "small"
/// scenes = [{ preset = "cluttered_cell", seed = 3 }, { file = "scenes/cell.toml" }]
///
/// [grid]
/// max_correspondence_distance = [0.1, 1.0]
/// max_iterations = [50, 500]
/// mls_method = ["off", "voxel_grid"]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub algorithm: Algorithm,
    pub cloud_size: CloudSize,
    pub scenes: Vec<SceneRef>,
    #[serde(default)]
    pub grid: ParamGrid,
    #[serde(default)]
    pub guess: GuessConfig,
    #[serde(default = "default_model_points")]
    pub model_points: usize,
    #[serde(default = "default_model_seed")]
    pub model_seed: u64,
    /// Sphere crop around the seed for ICP, metres.
    #[serde(default = "default_crop_radius")]
    pub crop_radius: f64,
    #[serde(default)]
    pub plane: PlaneRemovalConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
}

fn default_model_points() -> usize {
    3000
}
fn default_model_seed() -> u64 {
    99
}
fn default_crop_radius() -> f64 {
    CropConfig::default().radius
}

impl SweepSpec {
    pub fn new(algorithm: Algorithm, cloud_size: CloudSize, scenes: Vec<SceneRef>) -> Self {
        Self {
            algorithm,
            cloud_size,
            scenes,
            grid: ParamGrid::default(),
            guess: GuessConfig::default(),
            model_points: default_model_points(),
            model_seed: default_model_seed(),
            crop_radius: default_crop_radius(),
            plane: PlaneRemovalConfig::default(),
            cluster: ClusterConfig::default(),
            detection: DetectionConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("sweep spec: {e}")))
    }

    /// Reads a spec; relative scene paths are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::parse(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for s in &mut spec.scenes {
            if let SceneRef::File { file } = s {
                if file.is_relative() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one scene".into(),
            ));
        }
        if self.model_points == 0 || !(self.crop_radius > 0.0) {
            return Err(Error::InvalidConfig(
                "model_points and crop_radius must be positive".into(),
            ));
        }
        self.grid.check()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scene_index: usize,
    pub scene: String,
    pub algorithm: Algorithm,
    pub size: CloudSize,
    pub max_correspondence_distance: f64,
    pub max_iterations: usize,
    pub mls_method: MlsMethod,
    pub mls_radius: Option<f64>,
    pub mls_param: Option<f64>,
    pub overlap: Option<f64>,
    pub delta: Option<f64>,
    pub step_fraction: Option<f64>,
    pub min_points: Option<usize>,
    /// Posed model against the unsmoothed scene, every model point counted.
    pub rms_mm: Option<f64>,
    pub converged: bool,
    pub iterations: Option<usize>,
    pub translation_error_mm: Option<f64>,
    pub rotation_error_deg: Option<f64>,
    pub wall_time_ms: f64,
    /// Error code when the row failed, empty otherwise.
    pub error: String,
}

impl SweepRow {
    pub fn params(&self) -> ParamSet {
        ParamSet {
            max_correspondence_distance: self.max_correspondence_distance,
            max_iterations: self.max_iterations,
            mls_method: self.mls_method,
            mls_radius: self.mls_radius,
            mls_param: self.mls_param,
            overlap: self.overlap,
            delta: self.delta,
            step_fraction: self.step_fraction,
            min_points: self.min_points,
        }
    }

    fn same_key(&self, other: &SweepRow) -> bool {
        self.scene_index == other.scene_index
            && self.scene == other.scene
            && self.algorithm == other.algorithm
            && self.size == other.size
            && self.params() == other.params()
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Record wall time per row; otherwise it is written as zero.
    pub timing: bool,
    /// Rows from an earlier run; matching rows are reused instead of rerun.
    pub previous: Vec<SweepRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.error.is_empty()).count()
    }
}

type Prepared = std::result::Result<PointCloud, &'static str>;

fn prepare(scene: &PointCloud, p: &ParamSet) -> Prepared {
    let upsampling = match p.mls_method {
        MlsMethod::Off => return Ok(scene.clone()),
        MlsMethod::Mls => Upsampling::None,
        MlsMethod::VoxelGrid => Upsampling::VoxelGridDilation,
    };
    let defaults = MlsConfig::default();
    let cfg = MlsConfig {
        search_radius: p.mls_radius.unwrap_or(defaults.search_radius),
        upsampling,
        upsample_param: p.mls_param.unwrap_or(defaults.upsample_param),
        ..defaults
    };
    mls_smooth(scene, &cfg).map_err(|e| e.code())
}

struct SceneData {
    label: String,
    truth: RigidTransform,
    /// Input to the algorithms before smoothing, cropped for ICP.
    scene: PointCloud,
    tree: KdTree,
    init: RigidTransform,
}

fn load_scene(spec: &SweepSpec, r: &SceneRef) -> Result<SceneData> {
    let mut s = r.resolve()?;
    s.samples_total = spec.cloud_size.samples();
    let synth = synthesize_scene(&s)?;
    let guess = simulate_user_guess(
        &synth.truth,
        spec.guess.sigma_pos,
        spec.guess.sigma_yaw_deg.to_radians(),
        s.rng_seed,
    )?;
    let scene = match spec.algorithm {
        Algorithm::Icp => sphere_crop(
            &synth.scene,
            &CropConfig {
                center: guess.position,
                radius: spec.crop_radius,
            },
        ),
        _ => synth.scene,
    };
    if scene.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(scene.points())?;
    Ok(SceneData {
        label: r.label(),
        truth: synth.truth,
        scene,
        tree,
        init: seed_to_transform(&guess),
    })
}

fn run_one(
    spec: &SweepSpec,
    model: &PointCloud,
    data: &SceneData,
    input: &PointCloud,
    p: &ParamSet,
) -> Result<RegistrationResult> {
    let icp = IcpConfig {
        max_correspondence_distance: p.max_correspondence_distance,
        max_iterations: p.max_iterations,
        ..IcpConfig::default()
    };
    match spec.algorithm {
        Algorithm::Icp => register_icp(model, input, &data.init, &icp),
        Algorithm::Fourpcs => {
            let cfg = FourPcsConfig {
                overlap_estimate: p.overlap.unwrap_or_default(),
                delta: p.delta.unwrap_or_default(),
                ..FourPcsConfig::default()
            };
            segment_then_register(input, model, &spec.plane, &spec.cluster, &cfg, &icp)
        }
        Algorithm::Slidebox => {
            let cfg = DetectionConfig {
                step_fraction: p.step_fraction.unwrap_or_default(),
                min_points: p.min_points.unwrap_or_default(),
                ..spec.detection
            };
            detect_robot(input, model, &cfg, &icp).map(|d| d.result)
        }
    }
}

fn row_for(spec: &SweepSpec, scene_index: usize, label: &str, p: &ParamSet) -> SweepRow {
    SweepRow {
        scene_index,
        scene: label.to_string(),
        algorithm: spec.algorithm,
        size: spec.cloud_size,
        max_correspondence_distance: p.max_correspondence_distance,
        max_iterations: p.max_iterations,
        mls_method: p.mls_method,
        mls_radius: p.mls_radius,
        mls_param: p.mls_param,
        overlap: p.overlap,
        delta: p.delta,
        step_fraction: p.step_fraction,
        min_points: p.min_points,
        rms_mm: None,
        converged: false,
        iterations: None,
        translation_error_mm: None,
        rotation_error_deg: None,
        wall_time_ms: 0.0,
        error: String::new(),
    }
}

/// Runs every scene against every parameter combination. Failures are
/// recorded in their row; only an invalid spec or an unusable model aborts.
pub fn run_sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepReport> {
    spec.validate()?;
    let combos = spec.grid.combinations(spec.algorithm);
    let model_mesh = spec.scenes[0].resolve()?.robot_mesh;
    let model = model_cloud(&model_mesh, spec.model_points, spec.model_seed)?;
    let mut rows = Vec::with_capacity(spec.scenes.len() * combos.len());
    for (si, r) in spec.scenes.iter().enumerate() {
        let label = r.label();
        let pending: Vec<(SweepRow, Option<SweepRow>)> = combos
            .iter()
            .map(|p| {
                let row = row_for(spec, si, &label, p);
                let prev = opts.previous.iter().find(|o| o.same_key(&row)).cloned();
                (row, prev)
            })
            .collect();
        if pending.iter().all(|(_, prev)| prev.is_some()) {
            rows.extend(pending.into_iter().filter_map(|(_, prev)| prev));
            continue;
        }
        let data = match load_scene(spec, r) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("scene {label}: {e}");
                for (mut row, prev) in pending {
                    row.error = e.code().to_string();
                    rows.push(prev.unwrap_or(row));
                }
                continue;
            }
        };
        let mut prepared: HashMap<(MlsMethod, Option<u64>, Option<u64>), Prepared> = HashMap::new();
        for ((mut row, prev), p) in pending.into_iter().zip(&combos) {
            if let Some(prev) = prev {
                rows.push(prev);
                continue;
            }
            let start = Instant::now();
            let key = (
                p.mls_method,
                p.mls_radius.map(f64::to_bits),
                p.mls_param.map(f64::to_bits),
            );
            let input = prepared
                .entry(key)
                .or_insert_with(|| prepare(&data.scene, p));
            let outcome = match input {
                Ok(input) => run_one(spec, &model, &data, input, p).map_err(|e| e.code()),
                Err(code) => Err(*code),
            };
            match outcome {
                Ok(res) => {
                    let posed = apply_transform(&res.transform, &model);
                    row.rms_mm = Some(rms_closest_point_mm(&posed, &data.tree)?);
                    row.converged = res.converged;
                    row.iterations = Some(res.iterations_used);
                    let (dt, da) = res.transform.error_to(&data.truth);
                    row.translation_error_mm = Some(dt * 1000.0);
                    row.rotation_error_deg = Some(da.to_degrees());
                }
                Err(code) => row.error = code.to_string(),
            }
            if opts.timing {
                row.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
            }
            log::info!("{} {:?}: {:?} {}", data.label, p, row.rms_mm, row.error);
            rows.push(row);
        }
    }
    let summary = summarize(&rows);
    Ok(SweepReport { rows, summary })
}
