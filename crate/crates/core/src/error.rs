use thiserror::Error;

/// Errors raised by the simulation library.
///
/// The variants separate malformed caller input from broken invariants inside
/// a run, so the CLI can map them onto distinct exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid input: {0}")]
    Input(String),
    /// A value failed a structural validation (probability vectors, tables).
    #[error("validation failed: {0}")]
    Validation(String),
    /// A runtime contract between components was broken.
    #[error("contract violated: {0}")]
    Contract(String),
    /// An experiment or check was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::Error::Input(format!($($arg)*)) };
}
macro_rules! contract_err {
    ($($arg:tt)*) => { $crate::error::Error::Contract(format!($($arg)*)) };
}
macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}

pub(crate) use {config_err, contract_err, input_err};
