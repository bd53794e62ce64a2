use thiserror::Error;

/// Errors produced by grid construction, evaluation and the UQ pipeline.
#[derive(Debug, Error)]
pub enum SgError {
    #[error("invalid distribution parameters: {0}")]
    Parameter(String),

    #[error("invalid interval [{a}, {b}]: lower bound must be strictly below upper bound")]
    Domain { a: f64, b: f64 },

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("unsupported rule size {0} (tabulated sizes are 1, 3, 9, 19, 35)")]
    UnsupportedSize(usize),

    #[error("level {level} is not supported by the {map} level-to-knots map")]
    UnsupportedLevel { map: &'static str, level: u32 },

    #[error("multi-index set is not downward closed: {0:?} is missing a backward neighbour")]
    NotDownwardClosed(Vec<u32>),

    #[error("multi-index set rows must be sorted lexicographically without duplicates (sort the set first)")]
    Unsorted,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("function evaluation failed at knot {knot:?}: {message}")]
    Evaluation { knot: Vec<f64>, message: String },

    #[error("singular Vandermonde system for tensor grid {idx:?}")]
    SingularVandermonde { idx: Vec<u32> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unsupported grid file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

impl SgError {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SgError::SingularVandermonde { .. }
                | SgError::Degenerate(_)
                | SgError::Numerical(_)
                | SgError::Model(_)
                | SgError::Evaluation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SgError>;
