use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use robref::bench::{Algorithm, MlsMethod, Preset};
use robref::detect::DescriptorKind;

/// Parses `N` comma-separated numbers.
fn numbers<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

#[derive(Debug, Parser)]
#[command(
    name = "robref",
    version,
    about = "Register a robot model against scene point clouds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a triangle mesh into a point cloud.
    Sample(SampleArgs),
    /// Generate a synthetic scene cloud with its ground-truth pose.
    Synth(SynthArgs),
    /// Keep the points of a cloud inside a sphere.
    Crop(CropArgs),
    /// Seeded ICP of the model against a scene cloud.
    RegisterIcp(IcpArgs),
    /// Plane removal, clustering and 4PCS, then ICP.
    #[command(name = "register-4pcs")]
    Register4pcs(FourPcsArgs),
    /// Sliding-box detection followed by four-start ICP.
    Detect(DetectArgs),
    /// Run every parameter combination of a sweep file and write CSV.
    Sweep(SweepArgs),
    /// ICP from yaw and position perturbations of the true pose.
    Robustness(RobustnessArgs),
    /// Serve registration requests over TCP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlgorithmArg {
    Icp,
    Fourpcs,
    Slidebox,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Icp => Algorithm::Icp,
            AlgorithmArg::Fourpcs => Algorithm::Fourpcs,
            AlgorithmArg::Slidebox => Algorithm::Slidebox,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MlsArg {
    Off,
    Mls,
    VoxelGrid,
}

impl From<MlsArg> for MlsMethod {
    fn from(m: MlsArg) -> Self {
        match m {
            MlsArg::Off => MlsMethod::Off,
            MlsArg::Mls => MlsMethod::Mls,
            MlsArg::VoxelGrid => MlsMethod::VoxelGrid,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PresetArg {
    ClutteredCell,
    IsolatedRobot,
    RobotFlushAgainstTable,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::ClutteredCell => Preset::ClutteredCell,
            PresetArg::IsolatedRobot => Preset::IsolatedRobot,
            PresetArg::RobotFlushAgainstTable => Preset::RobotFlushAgainstTable,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DescriptorArg {
    Local,
    Global,
}

impl From<DescriptorArg> for DescriptorKind {
    fn from(d: DescriptorArg) -> Self {
        match d {
            DescriptorArg::Local => DescriptorKind::LocalHistogram,
            DescriptorArg::Global => DescriptorKind::GlobalSignature,
        }
    }
}

/// Robot model: the bundled arm, a PLY mesh to sample, or a cloud file.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "builtin")]
    pub model: String,
    /// Samples drawn when the model is a mesh.
    #[arg(long, default_value_t = 3000)]
    pub model_points: usize,
    #[arg(long, default_value_t = 99)]
    pub model_seed: u64,
}

/// Scene given as a cloud file, a scene TOML file or a preset.
#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Point cloud file (.ply, .pcd, .xyz).
    #[arg(long, conflicts_with_all = ["scene_file", "preset"])]
    pub scene: Option<PathBuf>,
    /// Scene description TOML, synthesized on the fly.
    #[arg(long)]
    pub scene_file: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "scene_file")]
    pub preset: Option<PresetArg>,
    /// Seed of the preset scene.
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
    /// Override the number of scene samples.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IcpOpts {
    /// Correspondence gate, metres.
    #[arg(long)]
    pub max_corr_dist: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MlsOpts {
    #[arg(long, value_enum, default_value = "off")]
    pub mls_method: MlsArg,
    /// MLS search radius, metres.
    #[arg(long)]
    pub mls_radius: Option<f64>,
    /// Voxel edge of the upsampling grid, metres.
    #[arg(long)]
    pub mls_param: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SegmentationOpts {
    /// Plane inlier distance, metres.
    #[arg(long)]
    pub plane_threshold: Option<f64>,
    /// Cluster linking distance, metres.
    #[arg(long)]
    pub cluster_tolerance: Option<f64>,
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    /// Expected visible share of the model, (0, 1].
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Congruence tolerance, metres.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sample_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectionOpts {
    /// Box step as a fraction of the box side.
    #[arg(long)]
    pub step_fraction: Option<f64>,
    #[arg(long)]
    pub min_points: Option<usize>,
    #[arg(long, value_enum)]
    pub descriptor: Option<DescriptorArg>,
    #[arg(long)]
    pub keypoint_voxel: Option<f64>,
    #[arg(long)]
    pub feature_radius: Option<f64>,
    /// Slide a single layer of boxes on the floor.
    #[arg(long)]
    pub planar: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// PLY mesh, or `builtin` for the bundled robot.
    #[arg(long, default_value = "builtin")]
    pub mesh: String,
    #[arg(long, default_value_t = 16_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Noise sigma per coordinate, metres.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CropArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Sphere centre, `x,y,z`.
    #[arg(long, value_parser = numbers::<3>, allow_hyphen_values = true)]
    pub center: [f64; 3],
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IcpArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Seed pose `x,y,z,yaw_deg`; without it a synthesized scene uses a
    /// simulated user guess.
    #[arg(long, value_parser = numbers::<4>, allow_hyphen_values = true)]
    pub seed_pose: Option<[f64; 4]>,
    /// RNG seed of the simulated guess.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Crop radius around the seed, metres.
    #[arg(long)]
    pub crop_radius: Option<f64>,
    #[command(flatten)]
    pub icp: IcpOpts,
    #[command(flatten)]
    pub mls: MlsOpts,
}

#[derive(Debug, Args)]
pub struct FourPcsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub seg: SegmentationOpts,
    #[command(flatten)]
    pub icp: IcpOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub det: DetectionOpts,
    #[command(flatten)]
    pub icp: IcpOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep description TOML.
    #[arg(long)]
    pub spec: PathBuf,
    /// Row CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary CSV; defaults to the row file with `-summary` appended.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Reuse matching rows already in the output file.
    #[arg(long)]
    pub resume: bool,
    /// Record wall time per row (makes the CSV non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub icp: IcpOpts,
    #[arg(long, default_value_t = 18.0)]
    pub rotation_step_deg: f64,
    /// Edge of the translation cube, metres.
    #[arg(long, default_value_t = 1.0)]
    pub translation_extent: f64,
    #[arg(long, default_value_t = 0.1)]
    pub translation_step: f64,
    /// Skip position offsets longer than this, metres.
    #[arg(long)]
    pub max_offset: Option<f64>,
    #[arg(long)]
    pub no_rotation: bool,
    #[arg(long)]
    pub no_translation: bool,
    #[arg(long)]
    pub timing: bool,
    /// Row CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Group statistics CSV; defaults to the row file with `-stats` appended.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Yaw offset against rms, CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, default_value_t = robref::service::DEFAULT_PORT)]
    pub port: u16,
    /// Algorithm for requests that do not name one.
    #[arg(long, value_enum, default_value = "icp")]
    pub algorithm: AlgorithmArg,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub icp: IcpOpts,
    #[arg(long)]
    pub crop_radius: Option<f64>,
    #[command(flatten)]
    pub seg: SegmentationOpts,
    #[command(flatten)]
    pub det: DetectionOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
