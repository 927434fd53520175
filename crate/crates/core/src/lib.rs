//! Rigid referencing of a robot-manipulator model against scene point clouds.
//!
//! The crate covers the whole path from a sampled spatial mesh to a robot pose:
//! geometry primitives ([`geom`]), file formats and mesh sampling ([`io`]),
//! scene conditioning ([`preprocess`]), seed-guided ICP ([`icp`]), congruent-set
//! coarse alignment ([`coarse`]), sliding-box detection ([`detect`]), synthetic
//! scenes with ground truth ([`synth`]), parameter sweeps ([`bench`]) and a TCP
//! referencing service ([`service`]).
//!
//! Geometry and registration code is generic over the scalar type (see
//! [`Real`]); the aliases below fix the precision for the common cases.

pub mod bench;
pub mod coarse;
pub mod detect;
pub mod error;
pub mod geom;
pub mod icp;
pub mod io;
pub mod preprocess;
pub mod scalar;
pub mod service;
pub mod synth;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use geom::{Aabb, KdTree, Point3, PointCloud, RigidTransform, Vector3};
pub use scalar::Real;

pub type PointCloud32 = geom::PointCloud<f32>;
pub type PointCloud64 = geom::PointCloud<f64>;
pub type RigidTransform32 = geom::RigidTransform<f32>;
pub type RigidTransform64 = geom::RigidTransform<f64>;
pub type KdTree32 = geom::KdTree<f32>;
pub type KdTree64 = geom::KdTree<f64>;
pub type Aabb32 = geom::Aabb<f32>;
pub type Aabb64 = geom::Aabb<f64>;
