use std::io;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("ambient dimension must be at least 1")]
    ZeroDimension,
    #[error("coordinate buffer has {len} values, expected {n} x {d}")]
    ShapeMismatch { len: usize, n: usize, d: usize },
    #[error("non-finite coordinate at point {point}, column {column}")]
    NonFiniteInput { point: usize, column: usize },
    #[error("duplicate points {first} and {second} (zero neighbor distance)")]
    DuplicatePoints { first: usize, second: usize },
    #[error("k too large: k = {k} but at most {max} neighbors are available")]
    KTooLarge { k: usize, max: usize },
    #[error("invalid neighbor count: {0}")]
    InvalidK(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate neighborhood at point {point}")]
    DegenerateNeighborhood { point: usize },
    #[error("argument must be positive, got {0}")]
    NonPositiveInput(f64),
    #[error("degenerate quadratic: leading coefficient is zero (S = 0 and gamma = 0)")]
    DegenerateQuadratic,
    #[error("only {usable} usable radii for the correlation-dimension fit, need 2")]
    InsufficientFitPoints { usable: usize },
    #[error("regression slope {slope} is not positive")]
    DegenerateFit { slope: f64 },
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("empty file")]
    EmptyFile,
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: cannot parse {value:?} as a finite number")]
    NonNumericCell {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("CSV failure: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the estimator itself on otherwise valid input
    /// (as opposed to malformed input or a violated precondition).
    pub fn is_estimator_failure(&self) -> bool {
        matches!(
            self,
            Error::DegenerateNeighborhood { .. }
                | Error::DegenerateQuadratic
                | Error::InsufficientFitPoints { .. }
                | Error::DegenerateFit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
