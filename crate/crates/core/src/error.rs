use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of a function (negative time, non-positive rate...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A class or system is not stable: arrivals outpace service.
    #[error("unstable: {0}")]
    Unstable(String),

    /// A configuration value is malformed or inconsistent.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A numerical routine failed to converge.
    #[error("numerical failure: {message} (residual estimate {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// An index function decreased somewhere on the checked age grid.
    #[error("index of class {class} decreases between ages {age_lo} and {age_hi} ({value_lo} > {value_hi})")]
    NonMonotone {
        class: usize,
        age_lo: f64,
        age_hi: f64,
        value_lo: f64,
        value_hi: f64,
    },

    /// A simulation invariant was broken.
    #[error("invariant violated at t={time}: {message}")]
    Invariant { time: f64, message: String },

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
