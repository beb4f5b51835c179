use thiserror::Error;

/// Errors surfaced by the solvers and validators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("undefined ratio: advertiser {advertiser} has zero value on query {query}")]
    UndefinedRatio { advertiser: usize, query: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("h not invertible: h(q) is not strictly increasing near q={q}")]
    NotInvertible { q: f64 },

    #[error("non-finite function value at {at}")]
    NonFinite { at: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("feasibility violated: g'(r)r + g(r) < 0 at r={r}")]
    FeasibilityViolated { r: f64 },

    #[error("no convergence after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    #[error("mixed constraint kinds: both advertisers must be budget-only or both tCPA-only")]
    MixedConstraints,
}

pub type Result<T> = std::result::Result<T, Error>;
