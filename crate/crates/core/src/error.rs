use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation tail mass {tail:.3e} exceeds tolerance {tolerance:.3e} at dim {dim}")]
    Truncation {
        tail: f64,
        tolerance: f64,
        dim: usize,
    },

    #[error("state norm {norm:.3e} underflows; superposition is degenerate")]
    DegenerateState { norm: f64 },

    #[error("conditioning probability {probability:.3e} below floor {floor:.3e}")]
    ZeroProbability { probability: f64, floor: f64 },

    #[error("ill-conditioned Gaussian integral: {0}")]
    IllConditionedIntegral(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("singular target: c+ + c- = {sum:.3e} (relative), displacement diverges")]
    SingularTarget { sum: f64 },

    #[error("infeasible cascade: {0}")]
    InfeasibleCascade(String),

    #[error("grid too coarse: normalization estimate {norm:.6} deviates from 1 by more than {tolerance:.1e}")]
    GridTooCoarse { norm: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of the numerical pipeline itself, as opposed to
    /// invalid inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroProbability { .. }
                | Error::IllConditionedIntegral(_)
                | Error::Truncation { .. }
                | Error::DegenerateState { .. }
                | Error::GridTooCoarse { .. }
        )
    }
}
