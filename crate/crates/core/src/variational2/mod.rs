//! Second-order inverse problem: multiplier conditions, ansatz search,
//! Lagrangian reconstruction along homotopy rays, and the one-dimensional
//! characteristics solver.

mod build;
mod conditions;
mod onedim;
mod search;
mod system;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::symexpr::{EnvError, EvalError, ParseError, SampleError};

pub use build::{
    build_k, build_l, build_l0, build_l_ik, build_lagrangian, euler_lagrange, Kinetic, LagrangianSO,
};
pub use conditions::{check_multiplier, condition_residuals, CheckOptions, CONDITION_IDS};
pub use onedim::{check_1d_field, solve_1d_multiplier, OneDimMultiplier};
pub use search::{
    algebraic_constraints, decay_factor, entry_name, search_multiplier, sym_unknowns, Ansatz,
    FoundMultiplier, LinearConstraint, Obstruction, ObstructionStep, SearchOutcome,
    ALGEBRAIC_LABEL, TRANSPORT_LABEL,
};
pub use system::{
    a_matrix, b_matrix, constant_matrix, d_hat, mat_mul, ExprMatrix, Multiplier, SecondOrderSystem,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum V2Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("domain error: {message}")]
    Domain { message: String },
    #[error("unsupported ansatz: {0}")]
    UnsupportedAnsatz(String),
    #[error("{what} failed verification (max residual {residual:e})")]
    Verification {
        what: String,
        residual: f64,
        witness: BTreeMap<String, f64>,
    },
    #[error("{what} depends on the velocities (max residual {residual:e})")]
    VelocityDependence {
        what: String,
        residual: f64,
        witness: BTreeMap<String, f64>,
    },
    #[error("integration failed: {0}")]
    Integration(String),
}

impl From<SampleError> for V2Error {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::Eval(e) => V2Error::Eval(e),
            other => V2Error::Domain {
                message: other.to_string(),
            },
        }
    }
}
