//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by series arithmetic, the analytic pipeline, samplers and
/// graph algorithms.
#[derive(Debug, Error)]
pub enum Error {
    /// A series operation was called with arguments outside its domain
    /// (e.g. `exp` on a series with nonzero constant term).
    #[error("series domain error: {0}")]
    SeriesDomain(String),

    /// An exact-arithmetic operation produced a value outside the expected
    /// set, which indicates an inconsistent class description.
    #[error("exact arithmetic inconsistency: {0}")]
    ExactInconsistency(String),

    /// Fixed-point or Newton iteration failed to converge.
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    /// A numeric result left its valid range (overflow, NaN, singular matrix).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested graph class is not registered.
    #[error("unknown graph class: {0}")]
    UnknownClass(String),

    /// The operation is not supported for this class (e.g. samplers for a
    /// series-only class registered through the extension point).
    #[error("unsupported for class {class}: {what}")]
    Unsupported { class: String, what: String },

    /// A graph-algorithm precondition failed (e.g. disconnected input to the
    /// block decomposition).
    #[error("graph domain error: {0}")]
    GraphDomain(String),

    /// A sampler exhausted its rejection budget.
    #[error("sampler budget exhausted after {nodes_created} node creations")]
    BudgetExhausted { nodes_created: u64 },

    /// Serialization or I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
