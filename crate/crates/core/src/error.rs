//! Error type shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- input / format / configuration problems ---
    #[error("cycle {cycle_id}: {len} samples, but {segments} segments need at least {min}")]
    CycleTooShort {
        cycle_id: i64,
        len: usize,
        min: usize,
        segments: usize,
    },

    #[error("cycle {cycle_id}: {reason}")]
    InvalidCycle { cycle_id: i64, reason: String },

    #[error("feature width mismatch: model expects {expected} columns, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("cycle {cycle_id} has no concentration label; training data must be fully labeled")]
    UnlabeledCycle { cycle_id: i64 },

    #[error(
        "row {row}, column {column}: value {value} is not strictly positive \
         but the column is log-transformed"
    )]
    NonPositiveForLog { row: usize, column: usize, value: f64 },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model document error: {0}")]
    ModelDoc(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    // --- computation failures ---
    #[error("response is constant; fitting needs at least two distinct values")]
    ConstantResponse,

    #[error(
        "{requested} components requested but at most {max} are identifiable \
         (n_samples = {n_samples}, n_features = {n_features})"
    )]
    TooManyComponents {
        requested: usize,
        max: usize,
        n_samples: usize,
        n_features: usize,
    },

    #[error("cross-validation fold {index} failed: {source}")]
    FoldFailed { index: usize, source: Box<Error> },

    #[error("no component count produced a valid cross-validation estimate")]
    NoViableComponents,

    #[error("metric needs at least two distinct concentration groups")]
    SingleGroup,

    #[error("no concentration group has two or more samples; uncertainty is undefined")]
    NoQualifyingGroup,

    #[error("neighborhood size k = {k} outside the valid range [{min}, {max}]")]
    NeighborhoodSize { k: usize, min: usize, max: usize },

    #[error("all {k} nearest neighbors share one concentration; increase k")]
    ConstantNeighborhood { k: usize },

    #[error("neighborhood-size rule cannot be satisfied: {0}")]
    KRuleUnsatisfiable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Distinguishes bad inputs (files, formats, configuration) from
    /// numerical or statistical failures on valid inputs. The CLI maps
    /// usage errors to exit code 2 and computation errors to 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::CycleTooShort { .. }
                | Error::InvalidCycle { .. }
                | Error::DimensionMismatch { .. }
                | Error::EmptyInput(_)
                | Error::UnlabeledCycle { .. }
                | Error::NonPositiveForLog { .. }
                | Error::Csv(_)
                | Error::Config(_)
                | Error::ModelDoc(_)
                | Error::Io(_)
        )
    }
}
