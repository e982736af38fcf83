use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix that must be symmetric positive definite failed the check
    /// (after one jittered retry of the Cholesky factorization).
    #[error("matrix `{name}` is not symmetric positive definite")]
    NotSpd { name: String },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error(
        "only {have} posterior samples at the modal cluster count, need at least {need}; \
         run a longer chain"
    )]
    InsufficientSamples { have: usize, need: usize },

    #[error("posterior covariance estimate is singular")]
    SingularPosteriorCovariance,

    #[error("{model}: sampling block `{block}` failed: {source}")]
    Sweep {
        model: &'static str,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot parse `{value}` at row {row}, column {column}")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn not_spd(name: impl Into<String>) -> Self {
        Error::NotSpd { name: name.into() }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
