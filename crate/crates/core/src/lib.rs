//! Three tiers of SIR models with vital dynamics and reinfection — deterministic,
//! random transmission coefficient, and nonautonomous-random recruitment — together
//! with the machinery needed to analyze them: equilibria and stability, Ornstein-Uhlenbeck
//! driven forcing with shift semantics, pathwise Runge-Kutta integration, pullback
//! attractor sampling, exponential-dichotomy projections, and regime classification.
//!
//! All numerics are generic over the scalar type through [`Scalar`]; `f64` is the
//! working precision everywhere it matters and concrete aliases are exported at the
//! crate root.
//!
//! ```
//! use sir_dynamics::integrator::integrate;
//! use sir_dynamics::model::{ModelParams, ModelVariant, NoiseBounds, SirState};
//! use sir_dynamics::noise::{ou_path, OuConfig};
//!
//! // Random transmission: gamma = 5 perturbed within (3.5, 6.5).
//! let params = ModelParams::new(5.0, 1.5, 0.5, 0.7, 5.0)?;
//! let z = ou_path(&OuConfig::new(-1.0, 11.0, 1e-3, 42)?)?;
//! let variant = ModelVariant::random_gamma(z, NoiseBounds::gamma_only(1.5)?);
//! let u0 = SirState::new(25.0, 1.0, 0.0)?;
//! let trajectory = integrate(&variant, &params, u0, (0.0, 10.0), 1e-3, 1e-2)?;
//! assert!(trajectory.final_state().infected > 0.0);
//! # Ok::<(), sir_dynamics::Error>(())
//! ```

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

pub mod dynamics;
pub mod ensemble;
mod error;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod noise;

pub use error::{Error, Result};

/// Floating-point scalar the whole crate is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Shorthand for lifting an `f64` literal into the generic scalar type.
#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal must be representable in the scalar type")
}

pub type ModelParams64 = model::ModelParams<f64>;
pub type SirState64 = model::SirState<f64>;
pub type NoiseBounds64 = model::NoiseBounds<f64>;
pub type SamplePath64 = noise::SamplePath<f64>;
pub type Trajectory64 = integrator::Trajectory<f64>;
pub type Scenario64 = model::Scenario<f64>;
