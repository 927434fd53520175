//! Scene conditioning ahead of registration.
//!
//! Configuration values are plain `f64` metres; the algorithms run in the
//! scalar type of the cloud they receive.

mod cluster;
mod crop;
mod mls;
mod normals;
mod planes;
mod voxel;

pub use cluster::{euclidean_cluster, euclidean_cluster_indices, ClusterConfig};
pub use crop::{sphere_crop, sphere_crop_indices, CropConfig};
pub use mls::{mls_smooth, MlsConfig, Upsampling};
pub use normals::{estimate_normals, estimate_normals_toward};
pub use planes::{remove_planes, Plane, PlaneRemoval, PlaneRemovalConfig};
pub use voxel::{voxel_downsample, voxel_key, voxel_representatives};
