use thiserror::Error;

/// Errors produced by the estimator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input text. `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// C(N, n) does not fit a signed 64-bit count.
    #[error("C({population}, {sample}) exceeds the 64-bit enumeration limit; use the Monte Carlo mode instead")]
    Capacity { population: usize, sample: usize },

    /// The fast median path cannot handle duplicated y-values.
    #[error("y contains tied values; the order-statistic fast path requires distinct values (use full enumeration)")]
    TiesPresent,

    /// An estimator could not be evaluated on a concrete sample.
    #[error("estimator `{estimator}` is undefined on sample {sample:?}: {reason}")]
    Evaluation {
        estimator: String,
        sample: Vec<usize>,
        reason: String,
    },

    /// The 3x3 weight system has no unique solution.
    #[error("singular weight system: determinant {0:e} is zero")]
    Singular(f64),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
