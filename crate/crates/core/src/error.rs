use thiserror::Error;

/// Errors raised by distribution construction, identity evaluation and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// `P(y) > 0` while `Q(y) = 0`; the divergence is `+inf`.
    #[error("infinite divergence: P({y}) > 0 but Q({y}) = 0")]
    InfiniteDivergence { y: u64 },

    /// The mixture puts no mass on the conditioning outcome.
    #[error("degenerate conditioning: no mixture mass at y = {y}")]
    DegenerateConditioning { y: u64 },

    /// Monte Carlo run never observed the conditioning outcome.
    #[error("insufficient conditioning: {hits} hits on Y = {y} after {samples} draws")]
    InsufficientConditioning { y: u64, hits: u64, samples: u64 },

    /// Negative binomial accumulation failed to reach the requested budget.
    #[error("truncation budget {eps:e} not reached within {limit} outcomes")]
    Truncation { eps: f64, limit: u64 },

    /// A finite-difference probe evaluated the target outside its domain.
    #[error("difference probe at {at} failed: {source}")]
    Probe { at: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
