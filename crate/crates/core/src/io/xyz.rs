use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

use super::{fmt_f32, parse_f32};

/// One point per line, `x y z`, extra columns ignored, `#` comments allowed.
pub(super) fn parse(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if toks.len() < 3 {
            return Err(err(format!(
                "expected 3 coordinates, found {} in '{line}'",
                toks.len()
            )));
        }
        let mut xyz = [0.0; 3];
        for k in 0..3 {
            xyz[k] = parse_f32(toks[k])
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad number '{}'", toks[k])))?;
        }
        points.push(Point3::from(xyz));
    }
    Ok(PointCloud::from_points(points))
}

pub(super) fn write(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.len() * 32);
    for p in cloud.points() {
        let _ = writeln!(s, "{} {} {}", fmt_f32(p.x), fmt_f32(p.y), fmt_f32(p.z));
    }
    s
}
