use alloc::string::String;
use alloc::vec::Vec;

use crate::index::Rect;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid corner: {0}")]
    InvalidCorner(String),

    #[error("incompatible index spaces: dimension {expected} vs {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hurst parameter {0} outside (0, 1/2]")]
    InvalidHurst(f64),

    #[error("inclusion-exclusion over {count} parts exceeds the cap of {max}")]
    TooManyParts { count: usize, max: usize },

    #[error("cover family of {count} members exceeds the search cap of {max}")]
    CoverTooLarge { count: usize, max: usize },

    #[error("index list is empty")]
    EmptyIndexList,

    #[error("covariance is not PSD within jitter budget (last failing pivot {pivot})")]
    NotPsd { pivot: usize },

    #[error("sample count must be positive")]
    ZeroSamples,

    #[error("needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("{} index set(s) absent from the ensemble", .0.len())]
    MissingIndices(Vec<Rect>),

    #[error("flow is not increasing between grid points {0} and {1}")]
    NonMonotoneFlow(usize, usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("the empty set has no flow through it")]
    EmptyTarget,

    #[error("H = 1/2 has no moving-average kernel; use the half-line simulation")]
    HalfCase,

    #[error("quadrature did not converge (estimated error {0:e})")]
    QuadratureNotConverged(f64),

    #[error("masses must be nondecreasing and non-negative")]
    InvalidMasses,

    #[error("time change is constant; no increments to regress on")]
    ConstantTimeChange,

    #[error("zero variance")]
    ZeroVariance,

    #[error("supplied union does not equal c1 ∪ c2")]
    UnionNotExpressible,

    #[error("no subset of the cover family contains the target")]
    NoCover,

    #[error("containment or disjointness violated: {0}")]
    Containment(&'static str),

    #[error("sequence is not decreasing at position {0}")]
    NotDecreasing(usize),

    #[error("{0}")]
    InvalidInput(String),
}
