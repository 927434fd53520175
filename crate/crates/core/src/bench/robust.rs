use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stats::Stats;
use crate::error::Result;
use crate::geom::{apply_transform, rms_closest_point_mm, KdTree, PointCloud, RigidTransform};
use crate::icp::{normalize_yaw, register_icp_tree, seed_to_transform, IcpConfig};
use crate::synth::{perturb_seed, PerturbationGrid, Perturbed};

/// A run counts as recovered within this distance of the truth.
pub const SUCCESS_TRANSLATION_MM: f64 = 10.0;
pub const SUCCESS_ROTATION_DEG: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct RobustnessOptions {
    pub rotation: bool,
    pub translation: bool,
    /// Skip translation offsets longer than this, metres.
    pub max_translation_offset: Option<f64>,
    pub timing: bool,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        Self {
            rotation: true,
            translation: true,
            max_translation_offset: None,
            timing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Rotation,
    Translation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub sweep: Sweep,
    /// Signed, in (-180, 180].
    pub yaw_offset_deg: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    pub offset_z: f64,
    /// Model placed at the perturbed seed, before ICP.
    pub initial_rms_mm: f64,
    pub rms_mm: Option<f64>,
    pub converged: bool,
    pub translation_error_mm: Option<f64>,
    pub rotation_error_deg: Option<f64>,
    pub success: bool,
    pub wall_time_ms: f64,
    pub error: String,
}

/// Statistics of one group of runs; rms figures cover successful runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub runs: usize,
    pub successes: usize,
    pub mean_mm: Option<f64>,
    pub min_mm: Option<f64>,
    pub max_mm: Option<f64>,
    pub std_mm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessReport {
    pub fn rotation(&self) -> impl Iterator<Item = &RobustnessRow> {
        self.rows.iter().filter(|r| r.sweep == Sweep::Rotation)
    }

    pub fn translation(&self) -> impl Iterator<Item = &RobustnessRow> {
        self.rows.iter().filter(|r| r.sweep == Sweep::Translation)
    }

    /// Yaw offset against final rms, ordered by offset.
    pub fn rotation_curve(&self) -> Vec<(f64, Option<f64>)> {
        let mut c: Vec<(f64, Option<f64>)> = self
            .rotation()
            .map(|r| (r.yaw_offset_deg, r.rms_mm))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    /// Seed rms, then ICP over all, rotation and translation runs.
    pub fn stats(&self) -> Vec<GroupStats> {
        let group = |name: &str, rows: Vec<&RobustnessRow>, seed: bool| {
            let values: Vec<f64> = if seed {
                rows.iter().map(|r| r.initial_rms_mm).collect()
            } else {
                rows.iter()
                    .filter(|r| r.success)
                    .filter_map(|r| r.rms_mm)
                    .collect()
            };
            let s = Stats::of(&values);
            GroupStats {
                group: name.to_string(),
                runs: rows.len(),
                successes: if seed { 0 } else { values.len() },
                mean_mm: s.map(|s| s.mean),
                min_mm: s.map(|s| s.min),
                max_mm: s.map(|s| s.max),
                std_mm: s.map(|s| s.std),
            }
        };
        vec![
            group("seed", self.rows.iter().collect(), true),
            group("icp_all", self.rows.iter().collect(), false),
            group("icp_rotation", self.rotation().collect(), false),
            group("icp_translation", self.translation().collect(), false),
        ]
    }
}

fn run_from(
    model: &PointCloud,
    tree: &KdTree,
    truth: &RigidTransform,
    p: &Perturbed,
    sweep: Sweep,
    icp_cfg: &IcpConfig,
    timing: bool,
) -> Result<RobustnessRow> {
    let start = Instant::now();
    let init = seed_to_transform::<f64>(&p.seed);
    let initial_rms_mm = rms_closest_point_mm(&apply_transform(&init, model), tree)?;
    let mut row = RobustnessRow {
        sweep,
        yaw_offset_deg: normalize_yaw(p.yaw_offset).to_degrees(),
        offset_x: p.offset[0],
        offset_y: p.offset[1],
        offset_z: p.offset[2],
        initial_rms_mm,
        rms_mm: None,
        converged: false,
        translation_error_mm: None,
        rotation_error_deg: None,
        success: false,
        wall_time_ms: 0.0,
        error: String::new(),
    };
    match register_icp_tree(model, tree, &init, icp_cfg) {
        Ok(res) => {
            let (dt, da) = res.transform.error_to(truth);
            row.rms_mm = Some(rms_closest_point_mm(
                &apply_transform(&res.transform, model),
                tree,
            )?);
            row.converged = res.converged;
            row.translation_error_mm = Some(dt * 1000.0);
            row.rotation_error_deg = Some(da.to_degrees());
            row.success = res.converged
                && dt * 1000.0 <= SUCCESS_TRANSLATION_MM
                && da.to_degrees() <= SUCCESS_ROTATION_DEG;
        }
        Err(e) => row.error = e.code().to_string(),
    }
    if timing {
        row.wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    }
    Ok(row)
}

/// ICP from seeds perturbed around the true pose: a full turn of yaw offsets
/// at the true position and a cube of position offsets at the true yaw.
pub fn run_robustness(
    model: &PointCloud,
    scene: &PointCloud,
    truth: &RigidTransform,
    grid: &PerturbationGrid,
    icp_cfg: &IcpConfig,
    opts: &RobustnessOptions,
) -> Result<RobustnessReport> {
    icp_cfg.validate()?;
    let set = perturb_seed(truth, grid)?;
    let tree = KdTree::build(scene.points())?;
    let mut rows = Vec::new();
    if opts.rotation {
        for p in &set.rotation {
            rows.push(run_from(
                model,
                &tree,
                truth,
                p,
                Sweep::Rotation,
                icp_cfg,
                opts.timing,
            )?);
        }
    }
    if opts.translation {
        let limit = opts.max_translation_offset.unwrap_or(f64::INFINITY);
        for p in &set.translation {
            let len = p.offset.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len <= limit + 1e-9 {
                rows.push(run_from(
                    model,
                    &tree,
                    truth,
                    p,
                    Sweep::Translation,
                    icp_cfg,
                    opts.timing,
                )?);
            }
        }
    }
    Ok(RobustnessReport { rows })
}
