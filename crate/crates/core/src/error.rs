use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building or solving a weak system.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported spatial dimension {0} (at most 2 spatial axes)")]
    UnsupportedDimension(usize),
    #[error("feature {0} is not in the dictionary")]
    FeatureNotFound(String),
    #[error("test function needs {needed} points on the {axis} axis but only {available} exist")]
    EmptyInterior {
        axis: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("derivative order {order} is not admissible for exponent p = {p}")]
    DerivativeOrder { order: usize, p: usize },
    #[error("non-finite values in monomial field of feature {0}")]
    NonFiniteFeature(usize),
    #[error("column {0} of the feature matrix is identically zero")]
    ZeroColumn(usize),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("unknown system: {0}")]
    UnknownSystem(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure stems from bad input (as opposed to a numerical failure).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidArgument(_)
                | Error::UnsupportedDimension(_)
                | Error::FeatureNotFound(_)
                | Error::Format { .. }
                | Error::UnknownSystem(_)
                | Error::Config(_)
                | Error::Io(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "grid",
            Error::InvalidArgument(_) => "argument",
            Error::UnsupportedDimension(_) => "dimension",
            Error::FeatureNotFound(_) => "feature",
            Error::EmptyInterior { .. } => "interior",
            Error::DerivativeOrder { .. } => "derivative",
            Error::NonFiniteFeature(_) => "overflow",
            Error::ZeroColumn(_) => "zero-column",
            Error::Singular(_) => "singular",
            Error::UndefinedMetric(_) => "metric",
            Error::Simulation(_) => "simulation",
            Error::Format { .. } => "format",
            Error::UnknownSystem(_) => "unknown-system",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
