//! Error type shared by every module.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("point {0:?} lies outside the grid bounding box")]
    OutOfBounds([f64; 3]),

    #[error("ball B({radius}, {center:?}) is not contained in the domain (margin {margin})")]
    BallNotContained {
        center: [f64; 3],
        radius: f64,
        margin: f64,
    },

    #[error("radius {radius} is below the resolution floor {floor}")]
    BelowResolution { radius: f64, floor: f64 },

    #[error("field is not normalized: component norms {0:?}")]
    NotNormalized(Vec<f64>),

    #[error("height vanishes at every probe radius around {0:?}")]
    VanishingHeight([f64; 3]),

    #[error("empty measure in B({radius}, {center:?})")]
    EmptyMeasure { center: [f64; 3], radius: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("bad dump file {path}: {reason}")]
    BadDump { path: PathBuf, reason: String },

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 3 for a missing upstream artifact, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact(_) => 3,
            _ => 1,
        }
    }
}
