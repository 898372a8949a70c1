use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// Observation covariance is singular; `observation` is the position (in
    /// the observed index list) of the first redundant observation.
    #[error("conditioning failed: observation {observation} is redundant")]
    Conditioning { observation: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("time {time} is not a point of the grid")]
    NotOnGrid { time: f64 },

    /// Both the circulant embedding and the Cholesky fallback failed.
    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A zero fCIR observation; the prediction needs the orthant estimator.
    #[error("observation {index} is zero; orthant-conditioned estimate required")]
    OrthantCaseRequired { index: usize },

    #[error("orthant constraint infeasible: acceptance rate {rate:e} after {proposals} proposals")]
    InfeasibleOrthant { rate: f64, proposals: u64 },

    #[error("training diverged at batch {batch}")]
    Divergence { batch: usize },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
