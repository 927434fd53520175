//! TCP referencing service: a client sends a scene cloud and a seed, the
//! server registers its robot model and answers with the transform.
//!
//! One request per connection; every connection gets its own thread. See
//! [`wire`] for the frame layout.

pub mod wire;

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

pub use wire::{Overrides, ReferenceRequest, ReferenceResponse, WireSeed, MAGIC, PROTOCOL_VERSION};

use crate::bench::Algorithm;
use crate::coarse::{segment_then_register, FourPcsConfig};
use crate::detect::{detect_robot, DetectionConfig};
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::icp::{register_icp, seed_to_transform, IcpConfig, RegistrationResult};
use crate::preprocess::{sphere_crop, ClusterConfig, CropConfig, PlaneRemovalConfig};

pub const DEFAULT_PORT: u16 = 40411;

const POLL: Duration = Duration::from_millis(20);
const IO_TIMEOUT: Duration = Duration::from_secs(60);

/// Model and default configuration shared by all requests.
#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub model: PointCloud,
    /// Used for requests whose header names no algorithm.
    pub default_algorithm: Algorithm,
    pub icp: IcpConfig,
    pub crop_radius: f64,
    pub fourpcs: FourPcsConfig,
    pub plane: PlaneRemovalConfig,
    pub cluster: ClusterConfig,
    pub detection: DetectionConfig,
}

impl ServiceConfig {
    pub fn new(model: PointCloud) -> Self {
        Self {
            model,
            default_algorithm: Algorithm::Icp,
            icp: IcpConfig::default(),
            crop_radius: CropConfig::default().radius,
            fourpcs: FourPcsConfig::default(),
            plane: PlaneRemovalConfig::default(),
            cluster: ClusterConfig::default(),
            detection: DetectionConfig::default(),
        }
    }
}

/// What the server computes for a request, without the network.
pub fn process(req: &ReferenceRequest, cfg: &ServiceConfig) -> Result<RegistrationResult> {
    if req.cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let o = &req.overrides;
    let icp = IcpConfig {
        max_correspondence_distance: o
            .max_correspondence_distance
            .unwrap_or(cfg.icp.max_correspondence_distance),
        max_iterations: o.max_iterations.unwrap_or(cfg.icp.max_iterations),
        ..cfg.icp
    };
    match req.algorithm {
        Algorithm::Icp => {
            let seed = req.seed.pose();
            let crop = CropConfig {
                center: seed.position,
                radius: o.crop_radius.unwrap_or(cfg.crop_radius),
            };
            let scene = sphere_crop(&req.cloud, &crop);
            register_icp(&cfg.model, &scene, &seed_to_transform(&seed), &icp)
        }
        Algorithm::Fourpcs => {
            let fp = FourPcsConfig {
                overlap_estimate: o.overlap.unwrap_or(cfg.fourpcs.overlap_estimate),
                delta: o.delta.unwrap_or(cfg.fourpcs.delta),
                ..cfg.fourpcs
            };
            segment_then_register(&req.cloud, &cfg.model, &cfg.plane, &cfg.cluster, &fp, &icp)
        }
        Algorithm::Slidebox => {
            let det = DetectionConfig {
                step_fraction: o.step_fraction.unwrap_or(cfg.detection.step_fraction),
                min_points: o.min_points.unwrap_or(cfg.detection.min_points),
                ..cfg.detection
            };
            detect_robot(&req.cloud, &cfg.model, &det, &icp).map(|d| d.result)
        }
    }
}

fn respond(result: Result<RegistrationResult>, start: Instant) -> ReferenceResponse {
    let server_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    match result {
        Ok(r) => ReferenceResponse::Ok {
            transform: r.transform,
            rms_mm: r.rms_mm,
            server_time_ms,
        },
        Err(e) => ReferenceResponse::Error {
            code: e.code().to_string(),
            message: e.to_string(),
            server_time_ms,
        },
    }
}

fn handle(stream: TcpStream, cfg: &ServiceConfig) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    let start = Instant::now();
    let mut reader = BufReader::new(stream.try_clone()?);
    let result = wire::read_request_or(&mut reader, cfg.default_algorithm)
        .and_then(|req| process(&req, cfg));
    let resp = respond(result, start);
    if let ReferenceResponse::Error { code, message, .. } = &resp {
        log::warn!("request failed: {code}: {message}");
    }
    let mut w = BufWriter::new(&stream);
    wire::write_response(&mut w, &resp)?;
    drop(w);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    Ok(())
}

/// A bound listener, not yet accepting.
pub struct Server {
    listener: TcpListener,
    cfg: Arc<ServiceConfig>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, cfg: ServiceConfig) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            cfg: Arc::new(cfg),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until `stop` is set, then waits for requests in
    /// flight to finish.
    pub fn run(self, stop: Arc<AtomicBool>) -> Result<()> {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !stop.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    log::debug!("connection from {peer}");
                    let cfg = Arc::clone(&self.cfg);
                    workers.push(std::thread::spawn(move || {
                        if let Err(e) = handle(stream, &cfg) {
                            log::warn!("connection from {peer}: {e}");
                        }
                    }));
                    workers.retain(|w| !w.is_finished());
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    /// Runs on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let thread = std::thread::spawn(move || self.run(flag));
        Ok(ServerHandle { addr, stop, thread })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<Result<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) -> Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        self.thread
            .join()
            .unwrap_or_else(|_| Err(Error::Io(std::io::Error::other("server thread panicked"))))
    }
}

/// Sends one request and waits for the answer.
pub fn request(addr: impl ToSocketAddrs, req: &ReferenceRequest) -> Result<ReferenceResponse> {
    let stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    let mut w = BufWriter::new(&stream);
    wire::write_request(&mut w, req)?;
    drop(w);
    stream.shutdown(std::net::Shutdown::Write)?;
    wire::read_response(&mut BufReader::new(&stream))
}
