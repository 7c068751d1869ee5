use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("meshes do not share topology: {0}")]
    TopologyMismatch(String),

    #[error("output value is not recorded on this tape")]
    NotOnTape,

    #[error("non-finite value produced by `{op}` (node {node})")]
    NonFinite { op: String, node: usize },

    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },

    #[error("region out of bounds: {0}")]
    RegionOutOfBounds(String),

    #[error("calibration set is inseparable: {0}")]
    Inseparable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("attack aborted at iteration {iteration}: {reason}")]
    AttackAborted { iteration: usize, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
