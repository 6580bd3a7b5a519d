use thiserror::Error;

use crate::instance::InstanceError;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    /// The solver's input contract does not hold for this instance.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A hard resource limit was hit and no usable answer exists.
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl SolveError {
    pub fn is_budget(&self) -> bool {
        matches!(self, SolveError::Budget(_))
    }
}
