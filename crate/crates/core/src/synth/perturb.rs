use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::RigidTransform;
use crate::icp::SeedPose;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationGrid {
    /// Radians.
    pub rotation_step: f64,
    /// Edge of the translation cube, metres.
    pub translation_extent: f64,
    pub translation_step: f64,
}

impl Default for PerturbationGrid {
    fn default() -> Self {
        Self {
            rotation_step: PI / 10.0,
            translation_extent: 1.0,
            translation_step: 0.1,
        }
    }
}

impl PerturbationGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.rotation_step > 0.0
            && self.translation_step > 0.0
            && self.translation_extent >= self.translation_step)
        {
            return Err(Error::InvalidConfig(
                "perturbation steps must be positive and extent >= step".into(),
            ));
        }
        Ok(())
    }

    /// Yaw offsets `k * rotation_step` covering one turn.
    pub fn yaw_offsets(&self) -> Vec<f64> {
        let n = (TAU / self.rotation_step).round().max(1.0) as usize;
        (0..n).map(|k| k as f64 * self.rotation_step).collect()
    }

    /// Integer steps `-h..=h` per axis, `h = round(extent / (2 step))`.
    pub fn translation_offsets(&self) -> Vec<[f64; 3]> {
        let h = (self.translation_extent / (2.0 * self.translation_step)).round() as i64;
        let mut out = Vec::new();
        for i in -h..=h {
            for j in -h..=h {
                for k in -h..=h {
                    let s = self.translation_step;
                    out.push([i as f64 * s, j as f64 * s, k as f64 * s]);
                }
            }
        }
        out
    }
}

/// One perturbed seed with the offset that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbed {
    pub seed: SeedPose,
    /// Yaw offset in radians (rotation sweep) or zero.
    pub yaw_offset: f64,
    /// Position offset in metres (translation sweep) or zero.
    pub offset: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSet {
    pub rotation: Vec<Perturbed>,
    pub translation: Vec<Perturbed>,
}

/// Seed equivalent to a ground-truth pose: its position and heading.
pub fn truth_seed(truth: &RigidTransform) -> SeedPose {
    let t = truth.translation;
    SeedPose::new([t.x, t.y, t.z], truth.yaw())
}

/// Yaw sweep at the true position and translation sweep at the true yaw.
pub fn perturb_seed(truth: &RigidTransform, grid: &PerturbationGrid) -> Result<PerturbationSet> {
    grid.validate()?;
    let base = truth_seed(truth);
    let rotation = grid
        .yaw_offsets()
        .into_iter()
        .map(|dy| Perturbed {
            seed: SeedPose::new(base.position, base.yaw + dy),
            yaw_offset: dy,
            offset: [0.0; 3],
        })
        .collect();
    let translation = grid
        .translation_offsets()
        .into_iter()
        .map(|o| Perturbed {
            seed: SeedPose {
                position: [
                    base.position[0] + o[0],
                    base.position[1] + o[1],
                    base.position[2] + o[2],
                ],
                yaw: base.yaw,
            },
            yaw_offset: 0.0,
            offset: o,
        })
        .collect();
    Ok(PerturbationSet {
        rotation,
        translation,
    })
}

/// Seed a user might place: the truth disturbed by isotropic Gaussian position
/// noise and Gaussian yaw noise.
pub fn simulate_user_guess(
    truth: &RigidTransform,
    sigma_pos: f64,
    sigma_yaw: f64,
    rng_seed: u64,
) -> Result<SeedPose> {
    if !(sigma_pos >= 0.0 && sigma_yaw >= 0.0) {
        return Err(Error::InvalidConfig("guess sigmas must be >= 0".into()));
    }
    let base = truth_seed(truth);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pos = Normal::new(0.0, sigma_pos).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let yaw = Normal::new(0.0, sigma_yaw).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut p = base.position;
    for v in &mut p {
        *v += pos.sample(&mut rng);
    }
    Ok(SeedPose::new(p, base.yaw + yaw.sample(&mut rng)))
}
