//! Crate-wide error type with stable machine-readable codes.

use thiserror::Error;

/// All failures surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Column names or kinds do not match the declared schema.
    #[error("schema: {0}")]
    Schema(String),
    /// A cell or count violates a data invariant (e.g. non-binary label).
    #[error("data: {0}")]
    Data(String),
    /// An invalid configuration value (bad fold count, negative weight, ...).
    #[error("config: {0}")]
    Config(String),
    /// Dimension mismatch between a model and its input.
    #[error("shape: {0}")]
    Shape(String),
    /// A forward pass produced NaN/Inf, or a gradient was non-finite.
    #[error("numeric: {0}")]
    Numeric(String),
    /// A metric has no defined value on this input (single class, constant column, ...).
    #[error("metric: {0}")]
    UndefinedMetric(String),
    /// An operation was called out of order (e.g. backward before forward).
    #[error("state: {0}")]
    State(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable short code for machine parsing of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::UndefinedMetric(_) => "metric",
            Error::State(_) => "state",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
