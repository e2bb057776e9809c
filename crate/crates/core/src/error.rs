use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("tet {tet}: vertex index {index} out of range ({n_vertices} vertices)")]
    TetIndexOutOfRange {
        tet: usize,
        index: usize,
        n_vertices: usize,
    },

    #[error("group {group:?}: vertex index {index} out of range ({n_vertices} vertices)")]
    GroupIndexOutOfRange {
        group: String,
        index: usize,
        n_vertices: usize,
    },

    #[error("tet {tet} has non-positive signed volume {volume:e}")]
    InvertedTet { tet: usize, volume: f64 },

    #[error("group {0:?} is defined more than once")]
    DuplicateGroup(String),

    #[error("group {0:?} not found")]
    MissingGroup(String),

    #[error("group {name:?} has the wrong kind (expected {expected})")]
    GroupKind { name: String, expected: &'static str },

    #[error("group {name:?} is not a closed consistently wound surface: {reason}")]
    OpenSurface { name: String, reason: String },

    #[error("infeasible arm geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("point {index} at ({x}, {y}, {z}) lies outside the mesh")]
    PointOutsideMesh { index: usize, x: f64, y: f64, z: f64 },

    #[error("degenerate triangle {0:?}")]
    DegenerateTriangle([usize; 3]),

    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("inconsistent constraints: {0}")]
    InconsistentConstraints(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-finite state after step")]
    NonFinite,

    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("{component}: {source}")]
    Component {
        component: String,
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn in_component(self, component: impl Into<String>) -> Self {
        Error::Component {
            component: component.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, mesh files, parameters).
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::TetIndexOutOfRange { .. }
            | Error::GroupIndexOutOfRange { .. }
            | Error::InvertedTet { .. }
            | Error::DuplicateGroup(_)
            | Error::MissingGroup(_)
            | Error::GroupKind { .. }
            | Error::OpenSurface { .. }
            | Error::InfeasibleGeometry(_)
            | Error::InvalidParameter(_)
            | Error::Io { .. } => true,
            Error::Component { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
