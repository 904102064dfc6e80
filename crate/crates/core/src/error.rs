use thiserror::Error;

/// Errors produced by the core numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of its evaluation budget before meeting tolerance.
    #[error(
        "quadrature budget exhausted after {evaluations} evaluations: \
         best estimate {estimate} with error bound {abs_error}"
    )]
    QuadratureBudget {
        estimate: f64,
        abs_error: f64,
        evaluations: usize,
    },

    /// An observation has zero density under both hypotheses.
    #[error("observation {0} lies outside the support of both hypotheses")]
    OutsideSupport(f64),

    /// An operation that needs data received none.
    #[error("no usable data: {0}")]
    NoData(String),

    #[error("failed to read tabulated density: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
