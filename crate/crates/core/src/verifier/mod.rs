//! Numeric certification of constructed actions.
//!
//! Actions are discretized with the midpoint rule and differentiated with
//! respect to interior grid states. On solutions of the input equations the
//! discrete variational derivative vanishes at second order in the step; off
//! solutions it must reproduce the multiplied equations.

mod certify;
mod density;
mod discrete;
mod helmholtz;
mod trajectory;

use thiserror::Error;

use crate::symexpr::{EnvError, EvalError};
use crate::variational1::V1Error;
use crate::variational2::V2Error;

pub use certify::{
    certify, zero_set_agreement, CertifyOptions, FirstOrderTarget, SecondOrderTarget,
    TargetEquations, VerificationReport, ZeroSetAgreement,
};
pub use density::{ActionDensity, RayDensity, SecondOrderDensity, TotalDerivative};
pub use discrete::discrete_variational_derivative;
pub use helmholtz::{helmholtz_asymmetry, Equation, FnEquation};
pub use trajectory::DiscreteTrajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    FirstOrder(#[from] V1Error),
    #[error(transparent)]
    SecondOrder(#[from] V2Error),
    #[error("no usable trajectory after {attempts} draws: {last}")]
    Trajectory {
        attempts: usize,
        last: Box<VerifyError>,
    },
}

pub(crate) fn finite(v: &[f64], what: &'static str, t: f64) -> Result<(), VerifyError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(VerifyError::NonFinite { what, t })
    }
}
