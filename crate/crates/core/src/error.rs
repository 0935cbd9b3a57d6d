use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("cos(delta) must be -1 or +1, got {0}")]
    InvalidPhase(f64),

    #[error("ill-posed polarization frame: alignment vector is parallel to the propagation axis")]
    DegenerateFrame,

    #[error("geometry is back-facing (n.wi = {cos_i:.3e}, n.wo = {cos_o:.3e})")]
    BackFacing { cos_i: f64, cos_o: f64 },

    #[error("unlit sample: s0 = {0}")]
    Unlit(f64),

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("k-means: requested {k} clusters for {n} points")]
    TooManyClusters { k: usize, n: usize },

    #[error("bundle version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

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

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
