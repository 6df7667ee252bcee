use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n*d must be even to pair half-edges (n={n}, d={d})")]
    OddHalfEdges { n: usize, d: usize },

    #[error("infeasible integer statistics: {0}")]
    InfeasibleStatistics(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("state space q^n = {states:.3e} exceeds cap {cap}")]
    StateCapExceeded { states: f64, cap: usize },

    #[error("conditioning event has zero mass: {0}")]
    ZeroMass(String),

    #[error("bad graph text: {0}")]
    ParseGraph(String),
}

pub type Result<T> = std::result::Result<T, Error>;
