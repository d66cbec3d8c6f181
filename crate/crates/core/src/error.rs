use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} at {location}: {message}")]
    Parse {
        file: String,
        location: String,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    Structure(String),

    #[error("degenerate geometry: face {face} has area {area:e}")]
    DegenerateFace { face: usize, area: f64 },

    #[error("level curve for landmark '{landmark}' at lambda={lambda}: {reason}")]
    Extraction {
        landmark: String,
        lambda: f64,
        reason: String,
    },

    #[error("ambiguous level curve for landmark '{landmark}' at lambda={lambda}: {components} components, none encloses the landmark")]
    Ambiguous {
        landmark: String,
        lambda: f64,
        components: usize,
    },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
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

    pub(crate) fn parse(file: impl ToString, location: impl ToString, message: impl ToString) -> Self {
        Error::Parse {
            file: file.to_string(),
            location: location.to_string(),
            message: message.to_string(),
        }
    }
}
