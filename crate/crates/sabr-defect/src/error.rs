//! Error type shared by all modules of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error enum. Variants mirror the failure modes of the public
/// operations rather than their call sites, so the same variant can surface
/// from the library API and from the command line driver.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {message}")]
    InvalidInput { message: String },

    /// A quote row or assembled smile failed validation (crossed strikes,
    /// non-positive vols, bid above ask, unparseable fields).
    #[error("malformed quote: {message}")]
    MalformedQuote { message: String },

    /// Delta-to-strike root search failed inside its bracket.
    #[error("strike conversion failed: {message} (bracket [{lo:.6e}, {hi:.6e}])")]
    ConversionFailure { message: String, lo: f64, hi: f64 },

    /// A price inversion had no admissible solution.
    #[error("no solution: {message}")]
    NoSolution { message: String },

    /// No parameter vector satisfies the bid-ask constraints of a slice.
    #[error("calibration infeasible: {message}")]
    CalibrationInfeasible { message: String },

    /// Too few retained posterior samples to summarize.
    #[error("insufficient samples: {got} retained after burn-in, need at least {needed}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Run configuration problem: missing or inconsistent files, bad flags,
    /// schedule entries that do not resolve against the quote input.
    #[error("config error: {message}")]
    Config { message: String },

    /// I/O failure, with the path that triggered it.
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_input(message: impl Into<String>) -> Self {
        Error::InvalidInput { message: message.into() }
    }

    pub fn malformed_quote(message: impl Into<String>) -> Self {
        Error::MalformedQuote { message: message.into() }
    }

    pub fn no_solution(message: impl Into<String>) -> Self {
        Error::NoSolution { message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config { message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
