use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty distribution")]
    EmptyDistribution,

    #[error("invalid probability table: {0}")]
    InvalidTable(String),

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("axis sets overlap on `{0}`")]
    OverlappingAxes(String),

    #[error("degree must be nonnegative, got {0}")]
    NegativeDegree(f64),

    #[error("predictors not comparable: (A,Y) marginals differ by {0:e}")]
    NotComparable(f64),

    #[error("no regularizer selected")]
    NoRegularizer,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
