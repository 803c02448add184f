use alloc::string::String;
use core::fmt;

/// Errors from model construction, evaluation and training.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix dimension did not match what the operation needs.
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// An invalid configuration value.
    Config(String),
    /// NSE is undefined for a constant observation series.
    ConstantTarget,
    /// A non-finite value appeared where a finite one is required.
    NonFinite(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                actual,
            } => write!(f, "{context}: expected dimension {expected}, got {actual}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::ConstantTarget => {
                write!(f, "NSE undefined: observation series is constant")
            }
            Error::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
