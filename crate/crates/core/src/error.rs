use thiserror::Error;

/// Broad classes of failure, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad user input: malformed spec, out-of-range parameter.
    Usage,
    /// Structural validation failed (graph, unitarity, hermiticity).
    Validation,
    /// A numerical procedure could not deliver a trustworthy answer.
    Numerical,
    /// Filesystem or serialization trouble.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph spec: {0}")]
    Spec(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix violates the vertex connectivity mask at {count} entries")]
    MaskViolation { count: usize },

    #[error("observable is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step {step} is too coarse (maximum {max})")]
    StepTooCoarse { step: f64, max: f64 },

    #[error("branch matching failed near lambda = {lambda}")]
    BranchMatching { lambda: f64 },

    #[error("eigendecomposition failed to converge")]
    Eigendecomposition,

    #[error("crossing count is inconsistent near t = {t} (fractional part {fraction:.3e})")]
    CountMismatch { t: f64, fraction: f64 },

    #[error("lambda = {lambda} is not a spectral point (residual {residual:.3e})")]
    NotSpectral { lambda: f64, residual: f64 },

    #[error("point is not on the surface (phase distance {distance:.3e})")]
    OffSurface { distance: f64 },

    #[error("{name} exceeded its declared bound {bound} (value {value})")]
    BoundExceeded { name: String, bound: f64, value: f64 },

    #[error("too few eigenvalues: need {needed}, have {available}")]
    TooFewEigenvalues { needed: usize, available: usize },

    #[error("window [{start}, {end}) extends beyond the computed range (0, {range}]")]
    WindowOutOfRange { start: f64, end: f64, range: f64 },

    #[error("spectrum carries no eigenvectors")]
    MissingEigenvectors,

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("degenerate equal lengths: the family needs a non-zero spread")]
    DegenerateLengths,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Spec(_) | InvalidParameter(_) | StepTooCoarse { .. } | DegenerateLengths => {
                ErrorKind::Usage
            }
            InvalidGraph(_)
            | DimensionMismatch { .. }
            | NotUnitary { .. }
            | MaskViolation { .. }
            | NotHermitian { .. }
            | BoundExceeded { .. } => ErrorKind::Validation,
            BranchMatching { .. }
            | Eigendecomposition
            | CountMismatch { .. }
            | NotSpectral { .. }
            | OffSurface { .. }
            | TooFewEigenvalues { .. }
            | WindowOutOfRange { .. }
            | MissingEigenvectors
            | EmptySpectrum => ErrorKind::Numerical,
            Io(_) | Csv(_) | Json(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
