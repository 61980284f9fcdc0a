use std::fmt;

use varinverse_core::variational1::V1Error;
use varinverse_core::variational2::V2Error;
use varinverse_core::verifier::VerifyError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_OBSTRUCTION: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input.
    Schema(String),
    /// A check or construction did not hold.
    Failed(String),
    /// No multiplier in the requested class.
    Obstruction(String),
    /// A trajectory or flow could not be integrated.
    Integration(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Failed(_) => EXIT_FAIL,
            CliError::Obstruction(_) => EXIT_OBSTRUCTION,
            CliError::Integration(_) => EXIT_INTEGRATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "input error: {m}"),
            CliError::Failed(m) => write!(f, "failed: {m}"),
            CliError::Obstruction(m) => write!(f, "no integrating multiplier: {m}"),
            CliError::Integration(m) => write!(f, "integration failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<V1Error> for CliError {
    fn from(e: V1Error) -> Self {
        let m = e.to_string();
        match e {
            V1Error::Invalid(_) | V1Error::Env(_) | V1Error::Parse(_) => CliError::Schema(m),
            V1Error::NonFinite { .. }
            | V1Error::Blowup { .. }
            | V1Error::SingularFundamental { .. } => CliError::Integration(m),
            V1Error::Eval(_) | V1Error::Sampling(_) => CliError::Failed(m),
        }
    }
}

impl From<V2Error> for CliError {
    fn from(e: V2Error) -> Self {
        let m = e.to_string();
        match e {
            V2Error::Invalid(_)
            | V2Error::Env(_)
            | V2Error::Parse(_)
            | V2Error::UnsupportedAnsatz(_) => CliError::Schema(m),
            V2Error::Integration(_) => CliError::Integration(m),
            _ => CliError::Failed(m),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        let m = e.to_string();
        match e {
            VerifyError::FirstOrder(e) => e.into(),
            VerifyError::SecondOrder(e) => e.into(),
            VerifyError::Invalid(_) | VerifyError::Env(_) => CliError::Schema(m),
            VerifyError::NonFinite { .. } | VerifyError::Trajectory { .. } => {
                CliError::Integration(m)
            }
            VerifyError::Eval(_) => CliError::Failed(m),
        }
    }
}
