use std::path::PathBuf;

use crate::grid::Region;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point (lon {lon}, lat {lat}) lies outside the grid bounding box")]
    OutOfBounds { lon: f64, lat: f64 },

    #[error("invalid trajectory {id:?}: {reason}")]
    InvalidTrajectory { id: String, reason: String },

    #[error("grid of {cells} cells cannot hold a region of area {ell}")]
    GridTooSmall { ell: usize, cells: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("published region {region:?} has area {area}, outside the admissible band [{ell}, {max}]")]
    AreaBand {
        region: Region,
        area: usize,
        ell: usize,
        max: usize,
    },

    #[error("hidden state {0} is not contained in any observation symbol")]
    UncoveredState(usize),

    #[error("observation sequence has zero probability at step {step}")]
    ZeroProbability { step: usize },

    #[error("trajectory {id:?}: {reason}")]
    Mismatch { id: String, reason: String },

    #[error("trajectory id sets differ: {0}")]
    IdMismatch(String),

    #[error("privacy violation in trajectory {id:?} at step {step}: {reason}")]
    PrivacyViolation { id: String, step: usize, reason: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
