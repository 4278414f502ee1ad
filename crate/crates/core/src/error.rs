use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on user-supplied data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The Fock product space does not fit in the configured memory budget.
    #[error("resource limit exceeded: {what} needs {required} bytes, {available} available")]
    Resource {
        what: String,
        required: u128,
        available: u128,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Mean-field integration drifted off the unit sphere.
    #[error("integration failure at t = {time}: norm drift {drift:e} exceeds {limit:e}; retry with dt <= {suggested_dt:e}")]
    Integration {
        time: f64,
        drift: f64,
        limit: f64,
        suggested_dt: f64,
    },
}

impl Error {
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Integration { .. })
    }
}
