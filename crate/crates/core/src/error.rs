use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("outcome impossible: probability {probability:e} of k = {k} counts is below 1e-300")]
    OutcomeImpossible { k: u32, probability: f64 },

    #[error("degenerate inference: {0}")]
    Degenerate(String),

    #[error("no convergence: {message} (estimate {estimate:e}, error bound {bound:e})")]
    Convergence { message: String, estimate: f64, bound: f64 },

    /// The scanned profile of `P(k, u)` against `u = 2g(t)` is attached for diagnosis.
    #[error("no interior maximum of P(k = {k}, t) found in the scanned range")]
    NoInteriorMaximum { k: u32, profile: Vec<(f64, f64)> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
