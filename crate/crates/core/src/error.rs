use thiserror::Error;

/// Errors raised by the estimators, selectors and calculators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sample has no spread (all values identical), so no scale can be derived.
    #[error("degenerate sample scale: standard deviation {sd} and IQR/1.349 {iqr_scale}")]
    DegenerateScale { sd: f64, iqr_scale: f64 },

    /// The plug-in bandwidth cannot be formed because one of the estimated
    /// functional combinations is not strictly positive.
    #[error("plug-in bandwidth failure: numerator {numerator}, denominator {denominator}")]
    PluginFailure { numerator: f64, denominator: f64 },

    /// An asymptotic constant has a vanishing denominator for this configuration.
    #[error("singular asymptotic constant: {0}")]
    Singular(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge on [{lower}, {upper}]: estimate {estimate}, error {error_estimate}, {evaluations} evaluations")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    /// A non-finite value appeared in an input or an intermediate result.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("csv error: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
