use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error type shared by every module in the crate.
///
/// Payloads are reported in `f64` regardless of the working scalar so the
/// error type does not need to be generic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input in {0}")]
    NonFiniteInput(&'static str),

    #[error("total population is zero while infected individuals are present")]
    DegeneratePopulation,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point is not an equilibrium (vector field residual {residual:.3e})")]
    NotAnEquilibrium { residual: f64 },

    #[error("stability classification paths disagree: {0}")]
    ClassificationDisagreement(String),

    #[error("requested grid of {nodes} nodes exceeds the supported size")]
    GridOverflow { nodes: u128 },

    #[error("time {t} is outside the generated window [{start}, {end}]")]
    OutOfWindow { t: f64, start: f64, end: f64 },

    #[error("{component} = {value:.3e} fell below the positivity tolerance at t = {t}")]
    PositivityViolation {
        t: f64,
        component: &'static str,
        value: f64,
    },

    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("no unstable direction: transmission does not exceed the removal rate")]
    NoUnstableDirection,

    #[error("orbit did not reach the target within t_max = {t_max}")]
    NonConvergence { t_max: f64 },

    #[error("matrix has an eigenvalue too close to the imaginary axis")]
    NonHyperbolicMatrix,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
