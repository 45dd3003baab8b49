use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("ill-conditioned matrix: condition estimate {estimate:.6e} exceeds threshold {threshold:.6e}")]
    IllConditioned { estimate: f64, threshold: f64 },

    #[error("integration blew up at node {node} (t = {t})")]
    BlowUp { node: usize, t: f64 },

    #[error("solvability assumption violated at node {node} (t = {t}): smallest singular value {min_sv:.6e}")]
    AssumptionViolated { node: usize, t: f64, min_sv: f64 },

    #[error("model validation failed: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("time {t} outside grid range [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. }
                | Error::BlowUp { .. }
                | Error::AssumptionViolated { .. }
                | Error::NonFinite { .. }
        )
    }
}
