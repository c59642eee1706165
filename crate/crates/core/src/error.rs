use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("activation `{name}` requires parameter `{param}`")]
    MissingParameter { name: String, param: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate projected step: w - eta*g vanished")]
    DegenerateStep,

    #[error("tangent toward the target is undefined (w = +/- target)")]
    DegenerateTangent,

    #[error("degenerate landscape: both Hessian smoothness constants are zero")]
    DegenerateLandscape,

    #[error("undefined fit: {0}")]
    UndefinedFit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::DegenerateStep
                | Error::DegenerateTangent
                | Error::DegenerateLandscape
        )
    }
}
