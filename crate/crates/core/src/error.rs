use thiserror::Error;

/// Errors produced by the analytical and simulation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:e}, error bound {error_bound:e})"
    )]
    Quadrature { estimate: f64, error_bound: f64, subdivisions: usize },

    #[error("series did not converge in {iterations} iterations: {what}")]
    Series { what: &'static str, iterations: usize },

    #[error("approximate joint moment supports at most 4 factors, got {0}")]
    UnsupportedOrder(usize),

    #[error("alpha-mu estimation failed (best relative residual {best_residual:e})")]
    Estimation { best_residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
