use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in view `{view}` at row {row}, column {col}")]
    NonFinite { view: String, row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate view: all points identical")]
    DegenerateView,

    #[error("view {view} has rank {achieved} below the requested {requested} singular vectors")]
    RankDeficient {
        view: usize,
        achieved: usize,
        requested: usize,
    },

    #[error("eigensolver failed to converge on a {0}x{0} matrix")]
    Eigen(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Manifest { .. } => "manifest",
            Error::Parse { .. } => "parse",
            Error::Shape(_) => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DegenerateView => "degenerate_view",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Eigen(_) => "eigensolver",
        }
    }

    /// Attach a view index to errors that carry one.
    pub(crate) fn in_view(self, v: usize) -> Self {
        match self {
            Error::RankDeficient {
                achieved,
                requested,
                ..
            } => Error::RankDeficient {
                view: v,
                achieved,
                requested,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
