//! Synthetic scenes with exact ground truth, and seed perturbation grids.

mod perturb;
mod primitives;
mod robot;
mod scene;

pub use perturb::{
    perturb_seed, simulate_user_guess, truth_seed, PerturbationGrid, PerturbationSet, Perturbed,
};
pub use primitives::{box_mesh, cylinder_between, cylinder_mesh, plane_mesh, CYLINDER_SEGMENTS};
pub use robot::robot_mesh;
pub use scene::{
    cluttered_cell, isolated_robot, model_cloud, robot_centroid, robot_flush_against_table,
    synthesize_scene, Clutter, PoseSpec, PrimitiveKind, SceneFile, SceneSpec, SynthScene,
    BIG_SAMPLES, DEFAULT_NOISE_SIGMA, SMALL_SAMPLES,
};
