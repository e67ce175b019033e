use thiserror::Error;

use crate::lattice::Space;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least one cell and finite values")]
    InvalidGrid,
    #[error("value {value} at node {index} is not finite")]
    NonFinite { index: usize, value: f64 },
    #[error("boundary condition violated for {space:?} space: {detail}")]
    BoundaryViolation { space: Space, detail: String },
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("evaluation point {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("lambda = {lambda} is outside the resolvent range (must exceed {bound})")]
    LambdaOutOfRange { lambda: f64, bound: f64 },
    #[error("perturbation is not positive: {0}")]
    NotPositive(String),
    #[error("spectral radius {spr} >= 1: the Neumann series cannot converge")]
    SpectralRadiusTooLarge { spr: f64 },
    #[error("Neumann series diverged after {terms} terms (term norm {term_norm:e})")]
    NeumannDivergence { terms: usize, term_norm: f64 },
    #[error("series did not converge within {max_terms} terms (last term norm {last_norm:e})")]
    NonConvergence { max_terms: usize, last_norm: f64 },
    #[error("rescaled Desch constant K = {k} >= 1 at lambda_shift = {lambda}; use a split schedule")]
    DeschConditionFails { k: f64, lambda: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("requested time {time} is outside [0, {horizon}] or off the time grid")]
    TimeOutOfRange { time: f64, horizon: f64 },
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
