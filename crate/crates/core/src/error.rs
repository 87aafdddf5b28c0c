use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} is too small for this operation (need n >= 3)")]
    DimensionTooSmall(usize),

    #[error("unsupported dimension {0} (supported range is 2..=6)")]
    UnsupportedDimension(usize),

    #[error("curvature data carries no covariant Hessian of the Ricci tensor")]
    MissingHessian,

    #[error("curvature data is missing field `{0}`")]
    MissingField(&'static str),

    #[error("invalid chart specification: {0}")]
    InvalidSpec(String),

    #[error("point {0:?} lies outside the chart domain")]
    OutOfDomain(Vec<f64>),

    #[error("numerical differentiation unstable: symmetry residual {residual:e} exceeds {tolerance:e}")]
    DifferentiationUnstable { residual: f64, tolerance: f64 },

    #[error("geodesic left the chart domain at arc length {arc_length}")]
    GeodesicLeftDomain { arc_length: f64 },

    #[error("exponential map Jacobian became singular at arc length {arc_length} (conjugate point)")]
    JacobianSingular { arc_length: f64 },

    #[error("geodesic integration failed: {0}")]
    IntegrationFailed(String),

    #[error("support radius {support} exceeds the admissible radius {limit}")]
    SupportTooLarge { support: f64, limit: f64 },

    #[error("t = {t} exceeds the admissible limit {limit} for the configured cutoff and tolerance")]
    TimeTooLarge { t: f64, limit: f64 },

    #[error("invalid quadrature specification: {0}")]
    InvalidQuadrature(String),

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    #[error("least-squares design matrix is ill conditioned (condition number {condition:e})")]
    IllConditionedFit { condition: f64 },

    #[error("quadrature noise dominates the t^2 signal (noise/signal ratio {ratio:e})")]
    NoiseDominates { ratio: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("volume {beta} is not below the total volume {cap} of the model space")]
    VolumeTooLarge { beta: f64, cap: f64 },

    #[error("volume must be positive, got {0}")]
    NonPositiveVolume(f64),

    #[error("degenerate level set: {0}")]
    LevelSetDegenerate(String),

    #[error("gamma = {0} is outside the admissible range gamma < 1/6")]
    GammaOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
