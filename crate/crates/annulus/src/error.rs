//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: input/domain
//! problems, failed bracketing, insufficient resolution, and everything else
//! (internal).

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// Invalid parameter or argument (bad exponents, a >= b, s < 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A nonlinearity whose sign structure is not the supported one.
    #[error("structure error: {0}")]
    Structure(String),

    /// A sampling grid too coarse to trust.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A root or transition could not be bracketed.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// An operation applied to a result in the wrong state
    /// (e.g. tail diagnostics on a finite-b profile).
    #[error("state error: {0}")]
    State(String),

    /// Malformed or inconsistent numerical data (non-monotone branch,
    /// unreadable profile file, ...).
    #[error("data error: {0}")]
    Data(String),

    /// An evaluation window outside the supported range.
    #[error("window error: {0}")]
    Window(String),

    /// The integrator gave up (step underflow or step budget exhausted).
    #[error("integration failure: {0}")]
    Integration(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI. Distinct nonzero codes per class:
    /// 2 = domain/validation, 3 = bracketing, 4 = resolution, 5 = internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Structure(_)
            | Error::State(_)
            | Error::Data(_)
            | Error::Window(_) => 2,
            Error::Bracket(_) => 3,
            Error::Resolution(_) => 4,
            Error::Integration(_) | Error::Io(_) | Error::Json(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
