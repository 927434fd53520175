use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point3;

use super::{fmt_f32, parse_f32};

struct Element {
    name: String,
    count: usize,
    /// Scalar property names; empty for the face element.
    properties: Vec<String>,
    list: bool,
}

fn perr(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses ASCII PLY into vertices and (triangulated) faces.
pub(super) fn parse(text: &str, path: &Path) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(perr(path, n, "missing 'ply' magic")),
        None => return Err(perr(path, 1, "empty file")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(perr(path, n, "only ASCII PLY is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| perr(path, n, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| perr(path, n, "element without count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(path, n, "property before element"))?;
                let parts: Vec<&str> = tok.collect();
                if parts.first() == Some(&"list") {
                    el.list = true;
                } else if let Some(name) = parts.last() {
                    el.properties.push(name.to_string());
                } else {
                    return Err(perr(path, n, "malformed property"));
                }
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => {
                return Err(perr(
                    path,
                    n,
                    format!("unexpected header keyword '{other}'"),
                ))
            }
        }
    }
    if !header_done {
        return Err(perr(path, text.lines().count(), "missing end_header"));
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        if el.name == "vertex" {
            let pos = |name: &str| el.properties.iter().position(|p| p == name);
            let (ix, iy, iz) = match (pos("x"), pos("y"), pos("z")) {
                (Some(x), Some(y), Some(z)) => (x, y, z),
                _ => return Err(perr(path, 0, "vertex element lacks x/y/z")),
            };
            vertices.reserve(el.count);
            for _ in 0..el.count {
                let (n, line) = body.next().ok_or_else(|| {
                    perr(
                        path,
                        text.lines().count(),
                        "fewer vertex lines than declared",
                    )
                })?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != el.properties.len() {
                    return Err(perr(
                        path,
                        n,
                        format!(
                            "expected {} values, found {}",
                            el.properties.len(),
                            toks.len()
                        ),
                    ));
                }
                let get = |i: usize| {
                    parse_f32(toks[i])
                        .ok_or_else(|| perr(path, n, format!("bad number '{}'", toks[i])))
                };
                let p = Point3::new(get(ix)?, get(iy)?, get(iz)?);
                if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                    return Err(perr(path, n, "non-finite coordinate"));
                }
                vertices.push(p);
            }
        } else if el.name == "face" && el.list {
            for _ in 0..el.count {
                let (n, line) = body.next().ok_or_else(|| {
                    perr(path, text.lines().count(), "fewer face lines than declared")
                })?;
                let idx: Option<Vec<u32>> =
                    line.split_whitespace().map(|t| t.parse().ok()).collect();
                let idx = idx.ok_or_else(|| perr(path, n, "bad face index"))?;
                let (&k, rest) = idx
                    .split_first()
                    .ok_or_else(|| perr(path, n, "empty face"))?;
                if rest.len() != k as usize || k < 3 {
                    return Err(perr(
                        path,
                        n,
                        format!("face declares {k} indices, found {}", rest.len()),
                    ));
                }
                for j in 1..rest.len() - 1 {
                    triangles.push([rest[0], rest[j], rest[j + 1]]);
                }
            }
        } else {
            for _ in 0..el.count {
                body.next();
            }
        }
    }
    if let Some((_, t)) = triangles
        .iter()
        .enumerate()
        .find(|(_, t)| t.iter().any(|&v| v as usize >= vertices.len()))
    {
        return Err(perr(
            path,
            0,
            format!("face {:?} references a missing vertex", t),
        ));
    }
    Ok((vertices, triangles))
}

pub(super) fn write(vertices: &[Point3], triangles: &[[u32; 3]]) -> String {
    let mut s = String::with_capacity(vertices.len() * 32 + triangles.len() * 16 + 256);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", vertices.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if !triangles.is_empty() {
        let _ = writeln!(s, "element face {}", triangles.len());
        s.push_str("property list uchar int vertex_indices\n");
    }
    s.push_str("end_header\n");
    for p in vertices {
        let _ = writeln!(s, "{} {} {}", fmt_f32(p.x), fmt_f32(p.y), fmt_f32(p.z));
    }
    for t in triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}
