//! Point-cloud and mesh files (ASCII PLY, ASCII PCD, plain XYZ) and
//! area-weighted mesh sampling.

mod mesh;
mod pcd;
mod ply;
mod sample;
mod xyz;

use std::path::Path;

pub use mesh::TriangleMesh;
pub use sample::{sample_mesh, sample_mesh_labeled, SamplingConfig};

use crate::error::{Error, Result};
use crate::geom::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFormat {
    Ply,
    Pcd,
    Xyz,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("ply") => Ok(CloudFormat::Ply),
            Some("pcd") => Ok(CloudFormat::Pcd),
            Some("xyz") | Some("txt") => Ok(CloudFormat::Xyz),
            _ => Err(Error::InvalidConfig(format!(
                "cannot infer cloud format from {}",
                path.display()
            ))),
        }
    }
}

/// Reads a cloud, choosing the format from the file extension.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    match CloudFormat::from_path(path)? {
        CloudFormat::Ply => ply::parse(&text, path).map(|(v, _)| PointCloud::from_points(v)),
        CloudFormat::Pcd => pcd::parse(&text, path),
        CloudFormat::Xyz => xyz::parse(&text, path),
    }
}

/// Writes a cloud; coordinates are stored as float32 text.
pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match CloudFormat::from_path(path)? {
        CloudFormat::Ply => ply::write(cloud.points(), &[]),
        CloudFormat::Pcd => pcd::write(cloud),
        CloudFormat::Xyz => xyz::write(cloud),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads an ASCII PLY mesh. Faces with more than three vertices are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let (vertices, triangles) = ply::parse(&text, path)?;
    TriangleMesh::new(vertices, triangles)
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ply::write(&mesh.vertices, &mesh.triangles))?;
    Ok(())
}

/// Shortest text that reads back to the same float32 value.
pub(crate) fn fmt_f32(v: f64) -> String {
    format!("{}", v as f32)
}

pub(crate) fn parse_f32(tok: &str) -> Option<f64> {
    tok.parse::<f32>().ok().map(f64::from)
}
