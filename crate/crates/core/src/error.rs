use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("linear system Ax = b is inconsistent (residual {residual:.3e})")]
    InconsistentSystem { residual: f64 },

    #[error("no equidistant point exists in the affine hull (residual {residual:.3e})")]
    DegenerateConfiguration { residual: f64 },

    #[error("supporting hyperplane does not meet the affine subspace")]
    InconsistentIntersection,

    #[error("point is not in the affine subspace (distance {distance:.3e})")]
    NotInAffine { distance: f64 },

    #[error("point is not on the diagonal subspace (block spread {spread:.3e})")]
    NotDiagonal { spread: f64 },

    #[error("invalid weights: {0}")]
    WeightError(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("bad dimension {0}: need n >= 2")]
    BadDimension(usize),

    #[error("could not draw an infeasible start point after {0} attempts")]
    ExhaustedRejection(usize),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
