use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the reachability toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {n} outside supported range {min}..={max}")]
    Size { n: usize, min: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("operator is not unitary (max deviation of U†U from identity: {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("relaxation matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    ContractivityViolation { min_eigenvalue: f64 },

    #[error("inconsistent generator: {0}")]
    InputInconsistency(String),

    #[error("affine fixed point undefined: generator is singular")]
    FixedPointUndefined,

    #[error("weighted relaxation combination is singular")]
    SingularCombination,

    #[error("ray origin is not small-time locally controllable")]
    OriginNotControllable,

    #[error("output is not proportional to target (relative residual {residual:.3e} > {tol:.3e})")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("fit is under-determined: {samples} samples for {params} free rates")]
    RankDeficient { samples: usize, params: usize },

    #[error("period map has no unique fixed point (I - M is singular)")]
    NoUniqueFixedPoint,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// `true` for errors caused by malformed input rather than by a numerical
    /// failure during computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Size { .. }
                | Error::DimensionMismatch { .. }
                | Error::Validation(_)
                | Error::NotUnitary { .. }
                | Error::InputInconsistency(_)
                | Error::ContractivityViolation { .. }
                | Error::RankDeficient { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
