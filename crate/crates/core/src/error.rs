use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("duplicate observation for station {station} at {timestamp}")]
    Duplicate { station: String, timestamp: String },

    #[error("value {value} out of range for station {station} at {timestamp}: {reason}")]
    Range {
        station: String,
        timestamp: String,
        value: f64,
        reason: &'static str,
    },

    #[error("station {station} has a gap at {timestamp} inside its coverage window")]
    Gap { station: String, timestamp: String },

    #[error("calendar index is not uniform: {0}")]
    Index(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("insufficient data{}: need at least {needed} {what}, got {got}", station_suffix(.station))]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
        station: Option<String>,
    },

    #[error("degenerate marginal{}: zero sample variance", station_suffix(.station))]
    DegenerateMarginal { station: Option<String> },

    #[error("collinear parent set for node {node}")]
    Collinearity { node: String },

    #[error("evidence does not cover {0}")]
    EvidenceCoverage(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("model archive error: {0}")]
    Archive(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

fn station_suffix(station: &Option<String>) -> String {
    match station {
        Some(s) => format!(" for station {s}"),
        None => String::new(),
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Archive(_) => ErrorClass::Config,
            Error::Parse { .. }
            | Error::Duplicate { .. }
            | Error::Range { .. }
            | Error::Gap { .. }
            | Error::Index(_)
            | Error::Aggregation(_)
            | Error::InsufficientData { .. }
            | Error::EvidenceCoverage(_)
            | Error::Data(_) => ErrorClass::Data,
            Error::DegenerateMarginal { .. } | Error::Collinearity { .. } => ErrorClass::Numeric,
            Error::Io { .. } => ErrorClass::Io,
            Error::Stage { source, .. } => source.class(),
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Attaches a station id to errors that carry an optional one.
    pub fn for_station(self, id: &str) -> Self {
        match self {
            Error::InsufficientData {
                what, needed, got, ..
            } => Error::InsufficientData {
                what,
                needed,
                got,
                station: Some(id.to_string()),
            },
            Error::DegenerateMarginal { .. } => Error::DegenerateMarginal {
                station: Some(id.to_string()),
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
