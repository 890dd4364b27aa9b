use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is rank deficient: expected rank {expected}, numerical rank {found}{}", fmt_index(.index))]
    RankDeficient {
        expected: usize,
        found: usize,
        /// Projection index when the offending matrix belongs to a projection set.
        index: Option<usize>,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid dimensions m={m}, r={r}: need 1 <= r < m")]
    InvalidDimensions { m: usize, r: usize },

    #[error("subspace not identifiable: normal matrix has rank {found}, expected {expected} (kernel dimension {kernel_dim})")]
    IdentifiabilityFailure {
        expected: usize,
        found: usize,
        kernel_dim: usize,
    },

    #[error("leading block of the projection basis is numerically singular")]
    EchelonDegenerate,

    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("overlap statistics need at least two projections, got {0}")]
    TooFewProjections(usize),

    #[error("empty matrix list")]
    EmptyList,

    #[error("non-positive denominator in bound ({name} = {value})")]
    NonPositiveDenominator { name: &'static str, value: f64 },

    #[error("noise matrices are required to compute epsilon")]
    MissingNoise,

    #[error("noiseless projections are required for this computation")]
    MissingTruth,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid sampling pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_index(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" (projection {i})"),
        None => String::new(),
    }
}

impl Error {
    /// True for failures of the numerical pipeline, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::IdentifiabilityFailure { .. }
                | Error::EchelonDegenerate
                | Error::NonPositiveDenominator { .. }
        )
    }

    pub(crate) fn with_index(self, i: usize) -> Self {
        match self {
            Error::RankDeficient {
                expected, found, ..
            } => Error::RankDeficient {
                expected,
                found,
                index: Some(i),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
