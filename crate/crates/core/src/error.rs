//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the CLI exit codes: [`Error::Config`] exits with 2,
/// everything else with 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry, grid, or parameter configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The linear system could not be solved (singular or indefinite).
    #[error("solver error: {0}")]
    Solver(String),

    /// Scenario sampling could not satisfy its constraints.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// Segmentation failed (e.g. degenerate single-valued image).
    #[error("segmentation error: {0}")]
    Segmentation(String),

    /// Force allocation had no contact evidence to distribute over.
    #[error("allocation error: {0}")]
    Allocation(String),

    /// File I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by invalid configuration rather than runtime
    /// failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
