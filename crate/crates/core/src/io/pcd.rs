use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

use super::{fmt_f32, parse_f32};

fn perr(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Minimal ASCII PCD reader: needs `FIELDS` with x, y, z and `DATA ascii`.
/// Rows holding NaN coordinates (invalid returns) are skipped.
pub(super) fn parse(text: &str, path: &Path) -> Result<PointCloud> {
    let mut fields: Option<Vec<String>> = None;
    let mut declared: Option<usize> = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut data_seen = false;
    for (n, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or_default().to_ascii_uppercase();
        match key.as_str() {
            "FIELDS" => fields = Some(tok.map(str::to_string).collect()),
            "POINTS" => {
                declared = Some(
                    tok.next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| perr(path, n, "bad POINTS value"))?,
                )
            }
            "DATA" => {
                if tok.next() != Some("ascii") {
                    return Err(perr(path, n, "only DATA ascii is supported"));
                }
                data_seen = true;
                break;
            }
            "VERSION" | "SIZE" | "TYPE" | "COUNT" | "WIDTH" | "HEIGHT" | "VIEWPOINT" => {}
            other => return Err(perr(path, n, format!("unknown header key '{other}'"))),
        }
    }
    if !data_seen {
        return Err(perr(path, text.lines().count(), "missing DATA line"));
    }
    let fields = fields.ok_or_else(|| perr(path, 0, "missing FIELDS"))?;
    let pos = |name: &str| fields.iter().position(|f| f == name);
    let (ix, iy, iz) = match (pos("x"), pos("y"), pos("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(perr(path, 0, "FIELDS lacks x y z")),
    };
    let mut points = Vec::with_capacity(declared.unwrap_or(0));
    let mut rows = 0usize;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != fields.len() {
            return Err(perr(
                path,
                n,
                format!("expected {} values, found {}", fields.len(), toks.len()),
            ));
        }
        let get = |i: usize| {
            if toks[i].eq_ignore_ascii_case("nan") {
                return Ok(f64::NAN);
            }
            parse_f32(toks[i]).ok_or_else(|| perr(path, n, format!("bad number '{}'", toks[i])))
        };
        let p = Point3::new(get(ix)?, get(iy)?, get(iz)?);
        if p.x.is_nan() || p.y.is_nan() || p.z.is_nan() {
            continue;
        }
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(perr(path, n, "non-finite coordinate"));
        }
        points.push(p);
    }
    if let Some(d) = declared {
        if d != rows {
            return Err(perr(
                path,
                text.lines().count(),
                format!("POINTS {d} but {rows} rows"),
            ));
        }
    }
    Ok(PointCloud::from_points(points))
}

pub(super) fn write(cloud: &PointCloud) -> String {
    let n = cloud.len();
    let mut s = String::with_capacity(n * 32 + 256);
    s.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n");
    let _ = writeln!(
        s,
        "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii"
    );
    for p in cloud.points() {
        let _ = writeln!(s, "{} {} {}", fmt_f32(p.x), fmt_f32(p.y), fmt_f32(p.z));
    }
    s
}
