mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::Parser;

use args::*;
use robref::bench::{
    read_csv_file, run_robustness, run_sweep, write_csv_file, RobustnessOptions, SweepOptions,
    SweepRow, SweepSpec,
};
use robref::coarse::{segment_then_register, FourPcsConfig};
use robref::detect::{detect_robot, DetectionConfig};
use robref::icp::{register_icp, seed_to_transform, IcpConfig, RegistrationResult, SeedPose};
use robref::io::{load_cloud, load_mesh, sample_mesh, save_cloud, SamplingConfig, TriangleMesh};
use robref::preprocess::{
    mls_smooth, sphere_crop, ClusterConfig, CropConfig, MlsConfig, PlaneRemovalConfig, Upsampling,
};
use robref::service::{Server, ServiceConfig};
use robref::synth::{
    robot_mesh, simulate_user_guess, synthesize_scene, truth_seed, PerturbationGrid, SceneFile,
    SceneSpec,
};
use robref::{PointCloud, RigidTransform};

/// Exit status of a run that completed but where registration failed.
const FAILED: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Sample(a) => sample(a),
        Command::Synth(a) => synth(a),
        Command::Crop(a) => crop(a),
        Command::RegisterIcp(a) => register_icp_cmd(a),
        Command::Register4pcs(a) => register_4pcs_cmd(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Robustness(a) => robustness(a),
        Command::Serve(a) => serve(a),
    }
}

fn mesh_from(name: &str) -> anyhow::Result<TriangleMesh> {
    if name == "builtin" {
        Ok(robot_mesh())
    } else {
        load_mesh(name).with_context(|| format!("reading mesh {name}"))
    }
}

fn load_model(a: &ModelArgs) -> anyhow::Result<PointCloud> {
    let cfg = SamplingConfig {
        sample_count: a.model_points,
        rng_seed: a.model_seed,
    };
    if a.model == "builtin" {
        return Ok(sample_mesh(&robot_mesh(), &cfg)?);
    }
    let path = Path::new(&a.model);
    let is_ply = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if is_ply {
        if let Ok(mesh) = load_mesh(path) {
            if !mesh.triangles.is_empty() {
                return Ok(sample_mesh(&mesh, &cfg)?);
            }
        }
    }
    load_cloud(path).with_context(|| format!("reading model {}", path.display()))
}

/// A scene cloud, with its true pose when it was synthesized here.
struct Scene {
    cloud: PointCloud,
    truth: Option<RigidTransform>,
}

fn scene_spec(a: &SceneArgs) -> anyhow::Result<Option<SceneSpec>> {
    let spec = if let Some(f) = &a.scene_file {
        let (file, dir) =
            SceneFile::load(f).with_context(|| format!("reading scene {}", f.display()))?;
        Some(file.resolve(&dir)?)
    } else {
        a.preset
            .map(|p| robref::bench::Preset::from(p).build(a.scene_seed))
    };
    Ok(spec.map(|mut s| {
        if let Some(n) = a.samples {
            s.samples_total = n;
        }
        s
    }))
}

fn load_scene(a: &SceneArgs) -> anyhow::Result<Scene> {
    if let Some(p) = &a.scene {
        let cloud = load_cloud(p).with_context(|| format!("reading scene {}", p.display()))?;
        return Ok(Scene { cloud, truth: None });
    }
    match scene_spec(a)? {
        Some(spec) => {
            let s = synthesize_scene(&spec)?;
            Ok(Scene {
                cloud: s.scene,
                truth: Some(s.truth),
            })
        }
        None => bail!("give a scene with --scene, --scene-file or --preset"),
    }
}

fn icp_config(o: &IcpOpts) -> IcpConfig {
    let d = IcpConfig::default();
    IcpConfig {
        max_correspondence_distance: o.max_corr_dist.unwrap_or(d.max_correspondence_distance),
        max_iterations: o.max_iter.unwrap_or(d.max_iterations),
        ..d
    }
}

fn segmentation_configs(
    o: &SegmentationOpts,
    seed: u64,
) -> (PlaneRemovalConfig, ClusterConfig, FourPcsConfig) {
    let (p, c, f) = (
        PlaneRemovalConfig::default(),
        ClusterConfig::default(),
        FourPcsConfig::default(),
    );
    (
        PlaneRemovalConfig {
            distance_threshold: o.plane_threshold.unwrap_or(p.distance_threshold),
            rng_seed: seed,
            ..p
        },
        ClusterConfig {
            tolerance: o.cluster_tolerance.unwrap_or(c.tolerance),
            min_cluster_size: o.min_cluster_size.unwrap_or(c.min_cluster_size),
            ..c
        },
        FourPcsConfig {
            overlap_estimate: o.overlap.unwrap_or(f.overlap_estimate),
            delta: o.delta.unwrap_or(f.delta),
            sample_size: o.sample_size.unwrap_or(f.sample_size),
            rng_seed: seed,
            ..f
        },
    )
}

fn detection_config(o: &DetectionOpts, seed: u64) -> DetectionConfig {
    let d = DetectionConfig::default();
    DetectionConfig {
        step_fraction: o.step_fraction.unwrap_or(d.step_fraction),
        min_points: o.min_points.unwrap_or(d.min_points),
        descriptor: o.descriptor.map_or(d.descriptor, Into::into),
        keypoint_voxel: o.keypoint_voxel.unwrap_or(d.keypoint_voxel),
        feature_radius: o.feature_radius.unwrap_or(d.feature_radius),
        planar: o.planar || d.planar,
        rng_seed: seed,
        ..d
    }
}

fn smooth(cloud: PointCloud, o: &MlsOpts) -> anyhow::Result<PointCloud> {
    let upsampling = match o.mls_method {
        MlsArg::Off => return Ok(cloud),
        MlsArg::Mls => Upsampling::None,
        MlsArg::VoxelGrid => Upsampling::VoxelGridDilation,
    };
    let d = MlsConfig::default();
    let cfg = MlsConfig {
        search_radius: o.mls_radius.unwrap_or(d.search_radius),
        upsampling,
        upsample_param: o.mls_param.unwrap_or(d.upsample_param),
        ..d
    };
    Ok(mls_smooth(&cloud, &cfg)?)
}

fn print_transform(t: &RigidTransform) {
    for r in 0..3 {
        println!(
            "transform_row{r} = {} {} {} {}",
            t.rotation[(r, 0)],
            t.rotation[(r, 1)],
            t.rotation[(r, 2)],
            t.translation[r]
        );
    }
}

/// Prints a registration outcome; failures are reported and give exit code 2.
fn report(
    result: robref::Result<RegistrationResult>,
    truth: Option<&RigidTransform>,
) -> anyhow::Result<u8> {
    match result {
        Ok(r) => {
            print_transform(&r.transform);
            println!("yaw_deg = {}", r.transform.yaw().to_degrees());
            println!("rms_mm = {}", r.rms_mm);
            println!("iterations = {}", r.iterations_used);
            println!("converged = {}", r.converged);
            if let Some(t) = truth {
                let (dt, da) = r.transform.error_to(t);
                println!("translation_error_mm = {}", dt * 1000.0);
                println!("rotation_error_deg = {}", da.to_degrees());
            }
            Ok(if r.converged { 0 } else { FAILED })
        }
        Err(e) => {
            println!("error_code = {}", e.code());
            eprintln!("registration failed: {e}");
            Ok(FAILED)
        }
    }
}

fn sample(a: SampleArgs) -> anyhow::Result<u8> {
    let mesh = mesh_from(&a.mesh)?;
    let cloud = sample_mesh(
        &mesh,
        &SamplingConfig {
            sample_count: a.count,
            rng_seed: a.seed,
        },
    )?;
    save_cloud(&cloud, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("points = {}", cloud.len());
    Ok(0)
}

fn synth(a: SynthArgs) -> anyhow::Result<u8> {
    let Some(mut spec) = scene_spec(&a.scene)? else {
        bail!("give a scene with --scene-file or --preset");
    };
    if let Some(n) = a.noise {
        spec.noise_sigma = n;
    }
    let s = synthesize_scene(&spec)?;
    save_cloud(&s.scene, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let seed = truth_seed(&s.truth);
    println!("points = {}", s.scene.len());
    println!("robot_points = {}", s.robot_indices().len());
    print_transform(&s.truth);
    println!(
        "seed_pose = {},{},{},{}",
        seed.position[0],
        seed.position[1],
        seed.position[2],
        seed.yaw.to_degrees()
    );
    Ok(0)
}

fn crop(a: CropArgs) -> anyhow::Result<u8> {
    let cloud = load_cloud(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let cfg = CropConfig {
        center: a.center,
        radius: a.radius.unwrap_or(CropConfig::default().radius),
    };
    let out = sphere_crop(&cloud, &cfg);
    save_cloud(&out, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("points = {}", out.len());
    Ok(0)
}

fn register_icp_cmd(a: IcpArgs) -> anyhow::Result<u8> {
    let model = load_model(&a.model)?;
    let scene = load_scene(&a.scene)?;
    let seed = match (&a.seed_pose, &scene.truth) {
        (Some(p), _) => SeedPose::new([p[0], p[1], p[2]], p[3].to_radians()),
        (None, Some(truth)) => simulate_user_guess(truth, 0.1, 20f64.to_radians(), a.seed)?,
        (None, None) => bail!("--seed-pose is required for a scene read from a file"),
    };
    let crop = CropConfig {
        center: seed.position,
        radius: a.crop_radius.unwrap_or(CropConfig::default().radius),
    };
    let cropped = sphere_crop(&scene.cloud, &crop);
    let input = smooth(cropped, &a.mls)?;
    let result = register_icp(
        &model,
        &input,
        &seed_to_transform(&seed),
        &icp_config(&a.icp),
    );
    report(result, scene.truth.as_ref())
}

fn register_4pcs_cmd(a: FourPcsArgs) -> anyhow::Result<u8> {
    let model = load_model(&a.model)?;
    let scene = load_scene(&a.scene)?;
    let (p, c, f) = segmentation_configs(&a.seg, a.seed);
    let result = segment_then_register(&scene.cloud, &model, &p, &c, &f, &icp_config(&a.icp));
    report(result, scene.truth.as_ref())
}

fn detect_cmd(a: DetectArgs) -> anyhow::Result<u8> {
    let model = load_model(&a.model)?;
    let scene = load_scene(&a.scene)?;
    let cfg = detection_config(&a.det, a.seed);
    match detect_robot(&scene.cloud, &model, &cfg, &icp_config(&a.icp)) {
        Ok(d) => {
            let c = d.best_box.aabb.center();
            println!("box_center = {},{},{}", c.x, c.y, c.z);
            println!("box_score = {}", d.best_box.match_score);
            println!("boxes_scored = {}", d.candidates_scored);
            println!("start_index = {}", d.start_index);
            report(Ok(d.result), scene.truth.as_ref())
        }
        Err(e) => report(Err(e), None),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn sweep(a: SweepArgs) -> anyhow::Result<u8> {
    let spec = SweepSpec::load(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let previous: Vec<SweepRow> = if a.resume && a.out.exists() {
        read_csv_file(&a.out).with_context(|| format!("reading {}", a.out.display()))?
    } else {
        Vec::new()
    };
    let report = run_sweep(
        &spec,
        &SweepOptions {
            timing: a.timing,
            previous,
        },
    )?;
    let summary = a.summary.unwrap_or_else(|| with_suffix(&a.out, "-summary"));
    write_csv_file(&report.rows, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_csv_file(&report.summary, &summary)
        .with_context(|| format!("writing {}", summary.display()))?;
    let failed = report.failed_rows();
    let diverged = report
        .rows
        .iter()
        .filter(|r| r.error.is_empty() && !r.converged)
        .count();
    println!("rows = {}", report.rows.len());
    println!("failed_rows = {failed}");
    println!("non_converged_rows = {diverged}");
    if failed + diverged > 0 {
        eprintln!("summary statistics cover converged rows only");
    }
    Ok(if failed > 0 { FAILED } else { 0 })
}

fn robustness(a: RobustnessArgs) -> anyhow::Result<u8> {
    let model = load_model(&a.model)?;
    let scene = load_scene(&a.scene)?;
    let Some(truth) = scene.truth else {
        bail!("robustness needs a synthesized scene (--scene-file or --preset) for its true pose");
    };
    let grid = PerturbationGrid {
        rotation_step: a.rotation_step_deg.to_radians(),
        translation_extent: a.translation_extent,
        translation_step: a.translation_step,
    };
    let opts = RobustnessOptions {
        rotation: !a.no_rotation,
        translation: !a.no_translation,
        max_translation_offset: a.max_offset,
        timing: a.timing,
    };
    let report = run_robustness(
        &model,
        &scene.cloud,
        &truth,
        &grid,
        &icp_config(&a.icp),
        &opts,
    )?;
    write_csv_file(&report.rows, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let stats_path = a.stats.unwrap_or_else(|| with_suffix(&a.out, "-stats"));
    write_csv_file(&report.stats(), &stats_path)
        .with_context(|| format!("writing {}", stats_path.display()))?;
    if let Some(path) = &a.curve {
        let mut text = String::from("yaw_offset_deg,rms_mm\n");
        for (yaw, rms) in report.rotation_curve() {
            text.push_str(&format!(
                "{yaw},{}\n",
                rms.map(|r| r.to_string()).unwrap_or_default()
            ));
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = report.rows.iter().filter(|r| !r.error.is_empty()).count();
    println!("runs = {}", report.rows.len());
    println!(
        "successes = {}",
        report.rows.iter().filter(|r| r.success).count()
    );
    println!("failed_runs = {failed}");
    Ok(if failed > 0 { FAILED } else { 0 })
}

fn serve(a: ServeArgs) -> anyhow::Result<u8> {
    let model = load_model(&a.model)?;
    let (plane, cluster, fourpcs) = segmentation_configs(&a.seg, a.seed);
    let cfg = ServiceConfig {
        default_algorithm: a.algorithm.into(),
        icp: icp_config(&a.icp),
        crop_radius: a.crop_radius.unwrap_or(CropConfig::default().radius),
        fourpcs,
        plane,
        cluster,
        detection: detection_config(&a.det, a.seed),
        ..ServiceConfig::new(model)
    };
    cfg.icp.validate()?;
    let server = Server::bind((a.bind.as_str(), a.port), cfg)
        .with_context(|| format!("binding {}:{}", a.bind, a.port))?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
        .context("installing the interrupt handler")?;
    println!("listening on {}", server.local_addr()?);
    server.run(stop)?;
    log::info!("server stopped");
    Ok(0)
}
