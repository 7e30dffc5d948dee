use crate::numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("rejection sampler acceptance {rate:.4} below floor {floor}")]
    EnvelopeRejected { rate: f64, floor: f64 },
    #[error("energy-controlled step size fell below {dt_min:e}")]
    StepUnderflow { dt_min: f64 },
    #[error("shooting iteration is not contracting (ratio {ratio:.3})")]
    NoContraction { ratio: f64 },
    #[error("shooting iteration did not converge in {iterations} steps (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("collision rate {kappa} exceeds thinning bound {bound}")]
    ThinningBoundViolated { kappa: f64, bound: f64 },
    #[error("potential has no drift parameters")]
    DriftParamsMissing,
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("no admissible shooting window inside horizon {t}")]
    ShootingHorizonExceeded { t: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("binning box covers {coverage:.6} of equilibrium mass, need {required}")]
    BoxCoverageInsufficient { coverage: f64, required: f64 },
    #[error("only {usable} usable points above the noise floor, need {required}")]
    InsufficientSignal { usable: usize, required: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
