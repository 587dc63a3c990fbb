use std::fmt;
use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage an error originated from, used to label propagated failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Returns,
    Admission,
    Engine,
    Spectrum,
    Surrogate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Returns => "returns",
            Stage::Admission => "admission",
            Stage::Engine => "engine",
            Stage::Spectrum => "spectrum",
            Stage::Surrogate => "surrogate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("series needs at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("non-positive close {close} on {date}")]
    NonPositivePrice { date: NaiveDate, close: f64 },

    #[error("dates not strictly increasing: {previous} followed by {next}")]
    NonMonotoneDates { previous: NaiveDate, next: NaiveDate },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid q grid: {0}")]
    InvalidQGrid(String),

    #[error("invalid scale grid: {0}")]
    InvalidScaleGrid(String),

    #[error("segment of length {len} cannot be fitted with a degree-{order} polynomial")]
    Underdetermined { len: usize, order: usize },

    #[error("degenerate series: every segment at scale {scale} has zero variance")]
    DegenerateSeries { scale: usize },

    #[error("fit range ({n_min}, {n_max}) holds {count} scales, at least 4 required")]
    FitRange { n_min: usize, n_max: usize, count: usize },

    #[error("spectrum needs at least 6 distinct points, got {0}")]
    TooFewSpectrumPoints(usize),

    #[error("spectrum does not close: {0}")]
    SpectrumNotClosed(String),

    #[error("surrogate ensemble degenerate: all {0} members rejected")]
    DegenerateEnsemble(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid generator spec: {0}")]
    Spec(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Stage label of a propagated error, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
