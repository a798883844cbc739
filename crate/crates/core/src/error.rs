use thiserror::Error;

/// Errors raised by the dependence estimators and their plumbing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("phi function {0} is not differentiable at t = {1}")]
    NonDifferentiable(String, f64),

    #[error("column {column} contains tied values")]
    Ties { column: usize },

    #[error("column {column} is degenerate (constant scores)")]
    DegenerateColumn { column: usize },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("window of {window} rows does not fit a sample of {n} rows")]
    WindowTooLarge { window: usize, n: usize },

    #[error("non-positive price {value} at row {row}, column {column}")]
    NonPositivePrice { row: usize, column: usize, value: f64 },

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: usize },

    #[error("within-group correlation block {group} is singular")]
    SingularBlock { group: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("point {0:?} lies on or too close to the boundary of the unit cube")]
    Boundary(Vec<f64>),

    #[error("nesting condition violated: root theta {root} exceeds child theta {child}")]
    NestingCondition { root: f64, child: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density unavailable: {0}")]
    DensityUnavailable(String),

    #[error("estimate is infinite; its asymptotic standard deviation is undefined")]
    InfiniteEstimate,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by numerical degeneracy rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite
                | Error::SingularBlock { .. }
                | Error::InfiniteEstimate
                | Error::DegenerateColumn { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
