use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample set is empty")]
    EmptySamples,

    #[error("need at least {needed} interior samples, got {got}")]
    TooFewInterior { needed: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no strictly interior point exists for the half-space set")]
    InfeasibleInterior,

    #[error("polytope is unbounded")]
    Unbounded,

    #[error("degenerate convex hull input: {0}")]
    DegenerateHull(String),

    #[error("target has no explicit surface ({0}); convert it to a mesh with marching cubes first")]
    NoSurface(&'static str),

    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),

    #[error("level {level} is not crossed anywhere in the field")]
    EmptyLevelSet { level: f64 },

    #[error("mesh has zero surface area")]
    ZeroArea,

    #[error("union of both solids is empty")]
    EmptyUnion,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
