//! Error type shared across the library and the CLI.

use thiserror::Error;

/// All failure modes of the library.
///
/// The CLI maps these onto its exit-code contract: configuration and cap
/// violations are usage errors, ingestion problems are data errors, and
/// linear-algebra / iteration failures are numerical errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature column {index} is constant (zero sample variance)")]
    ConstantColumn { index: usize },

    #[error("response is constant (zero sample variance)")]
    ConstantResponse,

    #[error("feature column {index} has zero norm; drop it before fitting")]
    ZeroNormColumn { index: usize },

    #[error("feature index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("{what} is not positive definite: pivot {pivot:.6e} at row {row}")]
    NotPositiveDefinite {
        what: String,
        pivot: f64,
        row: usize,
    },

    #[error(
        "exact enumeration over {p} features exceeds the cap of {cap}; \
         use an approximate backend instead"
    )]
    EnumerationTooLarge { p: usize, cap: usize },

    #[error("projection still rank-deficient after {retries} resampling attempts")]
    RankDeficientProjection { retries: usize },

    #[error(
        "message passing diverged at iteration {iteration}: effective noise {tau_t2:.6e} \
         exceeded 1e6 x initial {tau0:.6e}; recent noise trace: {trace:?}"
    )]
    Diverged {
        iteration: usize,
        tau_t2: f64,
        tau0: f64,
        trace: Vec<f64>,
    },

    #[error(
        "hyperparameter tuning aborted in round {round}; \
         last stable values: lambda = {lambda}, sigma2 = {sigma2}"
    )]
    TuningAborted {
        round: usize,
        lambda: f64,
        sigma2: f64,
    },

    #[error("input data are not standardized; standardize first or opt out explicitly")]
    NotStandardized,

    #[error("zero signal: the population signal variance is zero")]
    ZeroSignal,

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
