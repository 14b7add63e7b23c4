use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("hopping block at site {site} is numerically singular (condition {condition:.3e})")]
    SingularHop { site: i64, condition: f64 },
    #[error("sequence window does not cover site {site}")]
    Range { site: i64 },
    #[error("transfer product overflow after {steps} steps; use the QR accumulator instead")]
    Scale { steps: i64 },
    #[error("non-finite values after {steps} steps (try a smaller reorthogonalization period)")]
    NumericBlowup { steps: usize },
    #[error("stripping recursion did not converge: residual {residual:.3e} at depth {depth}")]
    Convergence { residual: f64, depth: usize },
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
