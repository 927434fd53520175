//! Frame layout, both directions:
//!
//! ```text
//! "REF1" | u32 LE header length | UTF-8 header, one key=value per line | payload
//! ```
//!
//! The request payload is `points` × 3 little-endian f32 coordinates; responses
//! carry no payload. Numbers in headers are printed in shortest round-trip form
//! so that parsing restores them bit for bit.

use std::io::{ErrorKind, Read, Write};

use crate::bench::Algorithm;
use crate::error::{Error, Result};
use crate::geom::{Matrix3, Point3, PointCloud, RigidTransform, Vector3};
use crate::icp::SeedPose;

pub const MAGIC: [u8; 4] = *b"REF1";
pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_HEADER_BYTES: u32 = 64 * 1024;
pub const MAX_POINTS: usize = 16_000_000;

/// Seed placed on the client: base position and orientation quaternion
/// `(w, x, y, z)`. Only the heading of the quaternion is used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WireSeed {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl WireSeed {
    pub fn from_pose(seed: &SeedPose) -> Self {
        let h = seed.yaw / 2.0;
        Self {
            position: seed.position,
            orientation: [h.cos(), 0.0, 0.0, h.sin()],
        }
    }

    /// Heading of the rotated x axis in the horizontal plane.
    pub fn pose(&self) -> SeedPose {
        let [w, x, y, z] = self.orientation;
        let fx = w * w + x * x - y * y - z * z;
        let fy = 2.0 * (x * y + w * z);
        SeedPose::new(self.position, fy.atan2(fx))
    }
}

/// Optional per-request configuration values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub max_correspondence_distance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub crop_radius: Option<f64>,
    pub overlap: Option<f64>,
    pub delta: Option<f64>,
    pub step_fraction: Option<f64>,
    pub min_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRequest {
    pub version: u32,
    pub seed: WireSeed,
    pub algorithm: Algorithm,
    pub overrides: Overrides,
    pub cloud: PointCloud,
}

impl ReferenceRequest {
    pub fn new(seed: &SeedPose, algorithm: Algorithm, cloud: PointCloud) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            seed: WireSeed::from_pose(seed),
            algorithm,
            overrides: Overrides::default(),
            cloud,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceResponse {
    Ok {
        transform: RigidTransform,
        rms_mm: f64,
        server_time_ms: f64,
    },
    Error {
        code: String,
        message: String,
        server_time_ms: f64,
    },
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Icp => "icp",
        Algorithm::Fourpcs => "fourpcs",
        Algorithm::Slidebox => "slidebox",
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadFrame(msg.into())
}

fn read_exact_or_bad(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => bad(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn write_frame(w: &mut impl Write, header: &str, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(header.len()).map_err(|_| bad("header too long"))?;
    let mut buf = Vec::with_capacity(8 + header.len() + payload.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(header.as_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Key-value pairs in file order; duplicate keys are rejected.
fn read_header(r: &mut impl Read) -> Result<Vec<(String, String)>> {
    let mut magic = [0u8; 4];
    read_exact_or_bad(r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(bad("wrong magic"));
    }
    let mut len = [0u8; 4];
    read_exact_or_bad(r, &mut len, "header length")?;
    let len = u32::from_le_bytes(len);
    if len > MAX_HEADER_BYTES {
        return Err(bad(format!(
            "header of {len} bytes exceeds {MAX_HEADER_BYTES}"
        )));
    }
    let mut text = vec![0u8; len as usize];
    read_exact_or_bad(r, &mut text, "header")?;
    let text = String::from_utf8(text).map_err(|_| bad("header is not UTF-8"))?;
    let mut out: Vec<(String, String)> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("header line without '=': {line}")))?;
        let k = k.trim().to_string();
        if out.iter().any(|(o, _)| *o == k) {
            return Err(bad(format!("duplicate header key {k}")));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(format!("bad value for {key}: {v}")))
}

fn nums(key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let out: Vec<f64> = v
        .split_whitespace()
        .map(|t| num(key, t))
        .collect::<Result<_>>()?;
    if out.len() != n || out.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("{key} needs {n} finite numbers")));
    }
    Ok(out)
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_request(w: &mut impl Write, req: &ReferenceRequest) -> Result<()> {
    let s = &req.seed;
    let mut h = format!(
        "version={}\nalgorithm={}\nseed={} {}\npoints={}\n",
        req.version,
        algorithm_name(req.algorithm),
        join(&s.position),
        join(&s.orientation),
        req.cloud.len()
    );
    let o = &req.overrides;
    let mut opt = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            h.push_str(&format!("{k}={v}\n"));
        }
    };
    opt(
        "max_correspondence_distance",
        o.max_correspondence_distance.map(|v| v.to_string()),
    );
    opt("max_iterations", o.max_iterations.map(|v| v.to_string()));
    opt("crop_radius", o.crop_radius.map(|v| v.to_string()));
    opt("overlap", o.overlap.map(|v| v.to_string()));
    opt("delta", o.delta.map(|v| v.to_string()));
    opt("step_fraction", o.step_fraction.map(|v| v.to_string()));
    opt("min_points", o.min_points.map(|v| v.to_string()));
    let mut payload = Vec::with_capacity(req.cloud.len() * 12);
    for p in req.cloud.points() {
        for c in [p.x, p.y, p.z] {
            payload.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    write_frame(w, &h, &payload)
}

/// Reads a request; a header without `algorithm` means ICP.
pub fn read_request(r: &mut impl Read) -> Result<ReferenceRequest> {
    read_request_or(r, Algorithm::Icp)
}

/// Reads a request, taking `default` when the header names no algorithm.
pub fn read_request_or(r: &mut impl Read, default: Algorithm) -> Result<ReferenceRequest> {
    let header = read_header(r)?;
    let mut version = None;
    let mut algorithm = default;
    let mut seed = None;
    let mut points = None;
    let mut o = Overrides::default();
    for (k, v) in &header {
        match k.as_str() {
            "version" => version = Some(num::<u32>(k, v)?),
            "algorithm" => {
                algorithm = match v.as_str() {
                    "icp" => Algorithm::Icp,
                    "fourpcs" => Algorithm::Fourpcs,
                    "slidebox" => Algorithm::Slidebox,
                    _ => return Err(bad(format!("unknown algorithm {v}"))),
                }
            }
            "seed" => {
                let n = nums(k, v, 7)?;
                seed = Some(WireSeed {
                    position: [n[0], n[1], n[2]],
                    orientation: [n[3], n[4], n[5], n[6]],
                });
            }
            "points" => points = Some(num::<usize>(k, v)?),
            "max_correspondence_distance" => o.max_correspondence_distance = Some(num(k, v)?),
            "max_iterations" => o.max_iterations = Some(num(k, v)?),
            "crop_radius" => o.crop_radius = Some(num(k, v)?),
            "overlap" => o.overlap = Some(num(k, v)?),
            "delta" => o.delta = Some(num(k, v)?),
            "step_fraction" => o.step_fraction = Some(num(k, v)?),
            "min_points" => o.min_points = Some(num(k, v)?),
            _ => return Err(bad(format!("unknown header key {k}"))),
        }
    }
    let version = version.ok_or_else(|| bad("missing version"))?;
    if version != PROTOCOL_VERSION {
        return Err(bad(format!("unsupported protocol version {version}")));
    }
    let seed = seed.ok_or_else(|| bad("missing seed"))?;
    let n = points.ok_or_else(|| bad("missing points"))?;
    if n > MAX_POINTS {
        return Err(bad(format!("{n} points exceeds {MAX_POINTS}")));
    }
    let mut payload = vec![0u8; n * 12];
    read_exact_or_bad(r, &mut payload, "point payload")?;
    let pts: Vec<Point3> = payload
        .chunks_exact(12)
        .map(|c| {
            let f = |i: usize| f64::from(f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]));
            Point3::new(f(0), f(4), f(8))
        })
        .collect();
    if pts
        .iter()
        .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        return Err(bad("non-finite coordinate"));
    }
    Ok(ReferenceRequest {
        version,
        seed,
        algorithm,
        overrides: o,
        cloud: PointCloud::from_points(pts),
    })
}

pub fn write_response(w: &mut impl Write, resp: &ReferenceResponse) -> Result<()> {
    let h = match resp {
        ReferenceResponse::Ok {
            transform,
            rms_mm,
            server_time_ms,
        } => {
            let r = &transform.rotation;
            let t = &transform.translation;
            let m = [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                t.x,
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                t.y,
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
                t.z,
            ];
            format!(
                "status=OK\ntransform={}\nrms_mm={rms_mm}\nserver_time_ms={server_time_ms}\n",
                join(&m)
            )
        }
        ReferenceResponse::Error {
            code,
            message,
            server_time_ms,
        } => format!(
            "status=ERROR\nerror_code={code}\nmessage={}\nserver_time_ms={server_time_ms}\n",
            message.replace(['\n', '\r'], " ")
        ),
    };
    write_frame(w, &h, &[])
}

pub fn read_response(r: &mut impl Read) -> Result<ReferenceResponse> {
    let header = read_header(r)?;
    let get = |k: &str| header.iter().find(|(o, _)| o == k).map(|(_, v)| v.as_str());
    let time = get("server_time_ms")
        .map(|v| num::<f64>("server_time_ms", v))
        .transpose()?
        .unwrap_or(0.0);
    match get("status") {
        Some("OK") => {
            let m = nums(
                "transform",
                get("transform").ok_or_else(|| bad("missing transform"))?,
                12,
            )?;
            let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
            let translation = Vector3::new(m[3], m[7], m[11]);
            Ok(ReferenceResponse::Ok {
                transform: RigidTransform::new(rotation, translation),
                rms_mm: num(
                    "rms_mm",
                    get("rms_mm").ok_or_else(|| bad("missing rms_mm"))?,
                )?,
                server_time_ms: time,
            })
        }
        Some("ERROR") => Ok(ReferenceResponse::Error {
            code: get("error_code").unwrap_or("UNKNOWN").to_string(),
            message: get("message").unwrap_or("").to_string(),
            server_time_ms: time,
        }),
        _ => Err(bad("missing or unknown status")),
    }
}
