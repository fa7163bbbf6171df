use thiserror::Error;

/// Every failure the library can report.
///
/// Variants fall in two groups: configuration problems (rejected before any
/// work is done) and computational failures (integration or root finding
/// that did not finish). [`Error::is_config`] tells them apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite coefficient {name} = {value}")]
    NonFiniteCoefficient { name: &'static str, value: f64 },

    #[error("coefficient {name} = {value} must be non-negative")]
    NegativeCoefficient { name: &'static str, value: f64 },

    #[error("coefficient {name} vanishes; the hyperbolicity ratios are undefined")]
    ZeroLeadingCoefficient { name: &'static str },

    #[error("degenerate saddle: a2*b0 - a0*b2 = {delta:e}")]
    DegenerateDelta { delta: f64 },

    #[error("mixed term violates ellipticity: c1^2 = {c1_sq:e} >= 4 c0 c2 = {bound:e}")]
    EllipticityViolation { c1_sq: f64, bound: f64 },

    #[error("mixed coefficients incompatible with a polynomial first integral: a1(u+1) = {lhs:e}, b1(v+1) = {rhs:e}")]
    MixedTermMismatch { lhs: f64, rhs: f64 },

    #[error("gamma = {0} outside the admissible range (-4, 4)")]
    GammaOutOfRange(f64),

    #[error("point ({x:e}, {y:e}) is not in the open positive quadrant")]
    NonPositivePoint { x: f64, y: f64 },

    #[error("invalid section configuration: {0}")]
    InvalidSection(String),

    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("passage time {t:e} below the minimum {t_min:e} attainable from this section")]
    TTooSmall { t: f64, t_min: f64 },

    #[error("integral diverges: {0}")]
    NonIntegrable(String),

    #[error("mean return observable is infinite for rho = {rho}")]
    InfiniteMeanConfig { rho: f64 },

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("the reduced one-dimensional backend cannot represent a perturbed field")]
    PerturbedUnsupported,

    #[error("step budget of {steps} exhausted at t = {t:e}")]
    MaxStepsExceeded { steps: usize, t: f64 },

    #[error("trajectory left the validity box at t = {t:e}, (x, y) = ({x:e}, {y:e})")]
    LeftDomain { t: f64, x: f64, y: f64 },

    #[error("step size underflow at t = {t:e}")]
    StepSizeUnderflow { t: f64 },

    #[error("root finding did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e}")]
    QuadratureFailure { estimate: f64, error: f64 },
}

impl Error {
    /// True for errors caused by the inputs rather than by the computation.
    pub fn is_config(&self) -> bool {
        !matches!(
            self,
            Error::MaxStepsExceeded { .. }
                | Error::LeftDomain { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::NoConvergence { .. }
                | Error::QuadratureFailure { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFiniteCoefficient { .. } => "NonFiniteCoefficient",
            Error::NegativeCoefficient { .. } => "NegativeCoefficient",
            Error::ZeroLeadingCoefficient { .. } => "ZeroLeadingCoefficient",
            Error::DegenerateDelta { .. } => "DegenerateDelta",
            Error::EllipticityViolation { .. } => "EllipticityViolation",
            Error::MixedTermMismatch { .. } => "MixedTermMismatch",
            Error::GammaOutOfRange(_) => "GammaOutOfRange",
            Error::NonPositivePoint { .. } => "NonPositivePoint",
            Error::InvalidSection(_) => "InvalidSection",
            Error::InvalidSettings(_) => "InvalidSettings",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::TTooSmall { .. } => "TTooSmall",
            Error::NonIntegrable(_) => "NonIntegrable",
            Error::InfiniteMeanConfig { .. } => "InfiniteMeanConfig",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::PerturbedUnsupported => "PerturbedUnsupported",
            Error::MaxStepsExceeded { .. } => "MaxStepsExceeded",
            Error::LeftDomain { .. } => "LeftDomain",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
