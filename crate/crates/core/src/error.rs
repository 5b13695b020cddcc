use thiserror::Error;

use crate::space::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is +inf at every sampled point of the region")]
    AllInfinite,

    #[error("objective returned a non-finite value (NaN or -inf) at {point:?}")]
    NonFiniteValue { point: Vec<f64> },

    #[error("no finite samples in the region apart from the reference point")]
    NoFiniteSamples,

    #[error(
        "reference point is not a minimizer on the region: f({point:?}) is {gap:e} below f(xbar)"
    )]
    NegativeGap { point: Point, gap: f64 },

    #[error("epsilon = {epsilon} is not below the growth constant gamma = {gamma}")]
    EpsilonNotBelowGamma { epsilon: f64, gamma: f64 },

    #[error("metric slope is +inf at the reference point (xbar outside dom phi)")]
    SlopeInfinite,

    #[error("Newton iteration did not converge after {iterations} steps (last residual {last:e})")]
    NewtonDivergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("conjugate gradient breakdown: {0}")]
    LinearSolverBreakdown(String),

    #[error("no sampled direction fell inside the requested shell")]
    NoSamplesInShell,
}
