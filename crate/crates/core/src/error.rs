use thiserror::Error;

/// Failures surfaced by the numerical engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("degree {degree} exceeds the supported degree {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("missing Levy moment of order {order} (degree {degree} requested)")]
    MissingLevyMoment { order: usize, degree: usize },

    #[error("eigensolver did not converge")]
    EigenNonConvergence,

    #[error("derivative of order {requested} unavailable (max {max})")]
    DerivativeUnavailable { requested: usize, max: usize },

    #[error("eigenvalue cluster of size {size} exceeds supported derivative order {max}")]
    ClusterTooLarge { size: usize, max: usize },

    #[error("matrix function has imaginary residue {residue:e}")]
    ComplexResult { residue: f64 },

    #[error("quadrature did not converge (achieved error {achieved:e})")]
    QuadratureNonConvergence { achieved: f64 },

    #[error("contour placement impossible: {0}")]
    ContourPlacement(String),

    #[error("resolvent singular at lambda = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("generator is not zero-stable: {0}")]
    NotZeroStable(String),

    #[error("stationary vector cannot be normalized (leading entry {leading:e})")]
    NormalizationImpossible { leading: f64 },

    #[error("grid too coarse: {got} points, need at least {min}")]
    GridTooCoarse { got: usize, min: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("residual check failed at degree {degree}: residual {residual:e}")]
    ResidualCheckFailed { degree: usize, residual: f64 },

    #[error("degenerate variance {variance:e}")]
    DegenerateVariance { variance: f64 },

    #[error("calendar time {t} beyond simulated subordinator horizon {horizon}")]
    PathTruncated { t: f64, horizon: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
