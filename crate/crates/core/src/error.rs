use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two values that must agree (basis ids, lengths, norms) do not.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A quadrature or iterative routine failed to reach its tolerance.
    #[error("numerical failure: {message} ({diagnostics})")]
    Numerical { message: String, diagnostics: String },
}

macro_rules! domain {
    ($($arg:tt)*) => { $crate::Error::Domain(alloc::format!($($arg)*)) };
}

macro_rules! contract {
    ($($arg:tt)*) => { $crate::Error::Contract(alloc::format!($($arg)*)) };
}

pub(crate) use contract;
pub(crate) use domain;
