use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("origin latitude is too close to a pole for the local frame")]
    PolarOrigin,

    #[error("world point maps to infinity under the homography")]
    AtInfinity,

    #[error("pixel lies on the horizon line")]
    OnHorizon,

    #[error("undistortion did not converge (residual {residual:.3e} px)")]
    NoConvergence { residual: f64 },

    #[error("horizon does not intersect the vertical through the image center")]
    NoHorizonIntersection,

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("bounding-box size {size} is not above the minimum size {min}")]
    SizeBelowMinimum { size: f64, min: f64 },

    #[error("inverse homography row has a vanishing y coefficient")]
    DegenerateRow,

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("time {t} is outside the track span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("singular innovation covariance")]
    SingularInnovation,

    #[error("no trajectories to select from")]
    NoTrajectories,

    #[error("every point was masked as an outlier")]
    AllMasked,

    #[error("track has no valid points")]
    EmptyTrack,

    #[error("degenerate regression data: {0}")]
    DegenerateData(String),

    #[error("prediction and ground-truth time spans do not overlap")]
    NoOverlap,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: u64, reason: impl Into<String>) -> Self {
        Error::Parse { line, reason: reason.into() }
    }

    /// Attaches a file path to an error for diagnostics.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File { path: path.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
