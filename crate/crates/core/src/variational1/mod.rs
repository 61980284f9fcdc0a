//! First-order inverse problem.
//!
//! Any first-order system `ẋ = f(t, x)` is variational after multiplication
//! by a transported symplectic form `Ω(t, x) = (∂χ)ᵀ Ω⁰ ∂χ`, where `χ` maps a
//! state back to its initial value. The action is `L = J(t, x)·ẋ − H(t, x)`
//! with `J` and `H` reconstructed along rays from the origin. Linear systems
//! get the same construction in closed matrix form.

mod action;
mod conditions;
mod flow;
mod linear;
mod system;

use thiserror::Error;

use crate::symexpr::{EnvError, EvalError, ParseError, SampleError};

pub use action::{ActionFields, FlowAction, TimeDerivativeMode};
pub use conditions::{
    check_first_order_conditions, FirstOrderCheckOptions, FIRST_ORDER_CONDITION_IDS,
};
pub use flow::FlowMap;
pub use linear::{quadratic_action, QuadraticAction, QuadraticRow, QuadraticSample};
pub use system::{reduce_to_first_order, FirstOrderSystem, LinearSystem, SymplecticSeed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum V1Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("integration blew up at t = {t} (|x| > 1e12); the flow does not reach this point")]
    Blowup { t: f64 },
    #[error("fundamental matrix is singular at t = {t} (condition number {condition:e})")]
    SingularFundamental { t: f64, condition: f64 },
    #[error("sampling failed: {0}")]
    Sampling(String),
}

impl From<SampleError> for V1Error {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::Eval(e) => V1Error::Eval(e),
            other => V1Error::Sampling(other.to_string()),
        }
    }
}
