use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mixture truncation too short: Poisson tail beyond m_max is {tail_bound:e}")]
    Truncation { tail_bound: f64 },

    #[error("increment series is empty")]
    EmptySeries,

    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// The likelihood has no interior maximiser (all increments zero).
    #[error("likelihood maximised at the boundary theta -> 0 (all increments are zero)")]
    Boundary,

    #[error("total score has no sign change on [{lo}, {hi}] (score {score_lo:e} .. {score_hi:e})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        score_lo: f64,
        score_hi: f64,
    },

    #[error("function is not unimodal on the bracket: valley at x = ({0}, {1}, {2})")]
    NotUnimodal(f64, f64, f64),

    #[error("quadrature did not converge (residual estimate {residual:e})")]
    Quadrature { residual: f64 },

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of an iterative or numerical procedure, as opposed
    /// to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. }
                | Error::Boundary
                | Error::NoSignChange { .. }
                | Error::NotUnimodal(..)
                | Error::Quadrature { .. }
                | Error::Convergence(_)
                | Error::Degenerate(_)
        )
    }
}
