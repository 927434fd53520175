use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("mesh has zero total area")]
    DegenerateMesh,
    #[error("no correspondences within {max_distance} m at the initial pose")]
    NoCorrespondences { max_distance: f64 },
    #[error("all four rotated ICP starts failed")]
    AllStartsFailed,
    #[error("no congruent 4-point base reached the required overlap (best score {best_score:.3})")]
    NoCongruentBase { best_score: f64 },
    #[error("segmentation failed: {0}")]
    SegmentationFailed(String),
    #[error("no candidate box contains enough points")]
    NoCandidateBox,
    #[error("MLS search radius too small: {without_neighbors} of {total} points have fewer than 3 neighbours")]
    RadiusTooSmall {
        without_neighbors: usize,
        total: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used on the wire and in sweep CSVs.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyCloud => "EMPTY_CLOUD",
            Error::TooFewPoints { .. } => "TOO_FEW_POINTS",
            Error::DegenerateMesh => "DEGENERATE_MESH",
            Error::NoCorrespondences { .. } => "NO_CORRESPONDENCES",
            Error::AllStartsFailed => "ALL_STARTS_FAILED",
            Error::NoCongruentBase { .. } => "NO_CONGRUENT_BASE",
            Error::SegmentationFailed(_) => "SEGMENTATION_FAILED",
            Error::NoCandidateBox => "NO_CANDIDATE_BOX",
            Error::RadiusTooSmall { .. } => "RADIUS_TOO_SMALL",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::BadFrame(_) => "BAD_FRAME",
            Error::Io(_) => "IO_ERROR",
        }
    }
}
