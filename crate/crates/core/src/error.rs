use thiserror::Error;

use crate::field::Chart;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero: denominator {value:e} at the evaluation point")]
    DivisionByZero { value: f64 },

    #[error("chart mismatch: expected {expected:?}, found {found:?}")]
    ChartMismatch { expected: Chart, found: Chart },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("degenerate growth vector ({0}, {1}); expected (4, 7)")]
    DegenerateGrowth(usize, usize),

    #[error("{name} is not a symmetry: {reason} (residual {residual:e})")]
    NotASymmetry {
        name: String,
        reason: String,
        residual: f64,
    },

    #[error("symmetry combination coefficients are all zero")]
    ZeroCombination,

    #[error("horizontal momentum (h1, h2, h3, h4) is zero")]
    ZeroHorizontalMomentum,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("malformed trajectory csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
