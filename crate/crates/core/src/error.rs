//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by the cone-calculus and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the input data was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An indicial root coincides with a weight-window endpoint.
    ///
    /// Window endpoints must stay pole-free; a coincidence invalidates the
    /// maximal-domain description and the extension checks, so it is an
    /// error rather than a silent exclusion.
    #[error("root q = {root} (mode {mode}) coincides with window endpoint {endpoint}")]
    EndpointCoincidence { root: f64, mode: usize, endpoint: f64 },

    /// A numerical routine failed to produce a usable result.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested operation is outside the implemented family.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Configuration problems; collects every violation, not just the first.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
