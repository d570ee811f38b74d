//! Error type shared across the crate.

use thiserror::Error;

/// Errors reported by kernel, estimator, inference, and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite coordinate at position {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("point must have at least one coordinate")]
    EmptyPoint,

    #[error("invalid bandwidth {0}: must be finite and > 0")]
    InvalidBandwidth(f64),

    #[error("invalid gamma {0}: must lie in (0, 1]")]
    InvalidGamma(f64),

    #[error("weight index {index} out of range 1..={r}")]
    WeightIndexOutOfRange { index: usize, r: usize },

    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("need at least 2 groups, got {0}")]
    NotEnoughGroups(usize),

    #[error("group {group} must contain at least {needed} points, got {got}")]
    GroupTooSmall {
        group: usize,
        needed: usize,
        got: usize,
    },

    #[error("group index {index} out of range for {groups} groups")]
    GroupIndexOutOfRange { index: usize, groups: usize },

    #[error("invalid proportions: {0}")]
    InvalidProportions(String),

    #[error("allocation of n = {n} gives group {group} zero points")]
    EmptyAllocation { group: usize, n: usize },

    #[error("invalid alpha {0}: must lie in (0, 1)")]
    InvalidAlpha(f64),

    #[error("degenerate variance: sigma_hat = 0, test statistic undefined")]
    DegenerateVariance,

    #[error("monte carlo draw count must be >= 1, got {0}")]
    InvalidDrawCount(usize),

    #[error("sigma_theory must be > 0, got {0}")]
    NonPositiveSigma(f64),

    #[error("population oracle unsupported: {0}")]
    UnsupportedOracle(String),

    #[error("null calibration requires all group generators to be identical")]
    NotANullScenario,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, Error>;
