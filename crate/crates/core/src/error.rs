use thiserror::Error;

/// Errors produced by the estimation, simulation and experiment layers.
#[derive(Debug, Error)]
pub enum GlError {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error(
        "capacity exceeded: {what} requires {count} evaluations, above the cap of {cap}; \
         use a fast path or the subsampled mode of the experiment harness"
    )]
    Capacity { what: String, count: u128, cap: u128 },

    #[error("unknown kernel `{0}` (expected one of gini_abs_diff, min_pairwise, range, identity)")]
    UnknownKernel(String),

    #[error("unknown estimator `{0}` (expected one of gini, gini_os, q, c, lms, gl)")]
    UnknownEstimator(String),

    #[error(
        "degenerate density estimate at p = {p}: H_n is flat on [{lo}, {hi}]; \
         widen the density half-width constant"
    )]
    DegenerateDensity { p: f64, lo: f64, hi: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("stationarity condition violated: {0}")]
    Stationarity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GlError>;
